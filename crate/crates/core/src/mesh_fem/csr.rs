//! Minimal compressed-sparse-row storage used by the assembly routines.

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Column indices and values of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.data[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| self.data[range.start + k])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    /// Entrywise sum of two matrices of equal shape.
    pub fn add(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut b = TripletBuilder::with_capacity((self.rows, self.cols), self.nnz() + other.nnz());
        for m in [self, other] {
            for i in 0..m.rows {
                for (j, v) in m.row(i) {
                    b.add(i, j, v);
                }
            }
        }
        b.build()
    }
}

/// Coordinate-format accumulator; duplicate entries are summed on `build`.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn with_capacity(shape: (usize, usize), capacity: usize) -> Self {
        Self {
            rows: shape.0,
            cols: shape.1,
            entries: Vec::with_capacity(capacity),
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.entries.push((i, j, v));
    }

    /// Sorts by (row, column) with a stable sort, so duplicates are summed in
    /// insertion order and the result is deterministic.
    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0usize; self.rows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut data: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &self.entries {
            if last == Some((i, j)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                data.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.rows {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            data,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let mut b = TripletBuilder::with_capacity((3, 3), 4);
        b.add(2, 1, 1.0);
        b.add(0, 0, 2.0);
        b.add(2, 1, 0.5);
        b.add(1, 2, -1.0);
        let m = b.build();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(2, 1), Some(1.5));
        assert_eq!(m.get(0, 0), Some(2.0));
        assert_eq!(m.get(0, 1), None);
        assert_eq!(m.row(1).collect::<Vec<_>>(), vec![(2, -1.0)]);
    }

    #[test]
    fn add_merges_patterns() {
        let mut a = TripletBuilder::with_capacity((2, 2), 2);
        a.add(0, 0, 1.0);
        a.add(1, 0, 2.0);
        let mut b = TripletBuilder::with_capacity((2, 2), 2);
        b.add(0, 0, 3.0);
        b.add(1, 1, 4.0);
        let s = a.build().add(&b.build());
        assert_eq!(s.get(0, 0), Some(4.0));
        assert_eq!(s.get(1, 0), Some(2.0));
        assert_eq!(s.get(1, 1), Some(4.0));
    }
}
