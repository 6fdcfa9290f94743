use crate::error::{invalid, Result};

/// Regular triangulation of the unit square.
///
/// Nodes are numbered row-major, `index = j * (n + 1) + i` for the node at
/// `(i h, j h)`. Every square `(i, j)` is split along the diagonal running from
/// its lower-left to its upper-right corner into two counterclockwise triangles,
/// stored at `2 * (j * n + i)` (lower-right) and `2 * (j * n + i) + 1`
/// (upper-left).
#[derive(Debug, Clone)]
pub struct Mesh {
    n: usize,
    nodes: Vec<[f64; 2]>,
    cells: Vec<[usize; 3]>,
    boundary_mask: Vec<bool>,
    /// Position of each node in the interior numbering, `None` on the boundary.
    interior_index: Vec<Option<usize>>,
    interior_nodes: Vec<usize>,
}

impl Mesh {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("mesh resolution n must be at least 1");
        }
        let h = 1.0 / n as f64;
        let np = n + 1;
        let mut nodes = Vec::with_capacity(np * np);
        let mut boundary_mask = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                nodes.push([i as f64 * h, j as f64 * h]);
                boundary_mask.push(i == 0 || j == 0 || i == n || j == n);
            }
        }
        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let ll = j * np + i;
                let lr = ll + 1;
                let ul = ll + np;
                let ur = ul + 1;
                cells.push([ll, lr, ur]);
                cells.push([ll, ur, ul]);
            }
        }
        let mut interior_index = vec![None; np * np];
        let mut interior_nodes = Vec::with_capacity((n.saturating_sub(1)).pow(2));
        for (k, &b) in boundary_mask.iter().enumerate() {
            if !b {
                interior_index[k] = Some(interior_nodes.len());
                interior_nodes.push(k);
            }
        }
        Ok(Self {
            n,
            nodes,
            cells,
            boundary_mask,
            interior_index,
            interior_nodes,
        })
    }

    /// Cells per direction.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary_mask
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_interior(&self) -> usize {
        self.interior_nodes.len()
    }

    /// All cells share the same area `h^2 / 2`.
    pub fn cell_area(&self) -> f64 {
        0.5 / (self.n * self.n) as f64
    }

    pub fn interior_index(&self, node: usize) -> Option<usize> {
        self.interior_index[node]
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn centroid(&self, cell: usize) -> [f64; 2] {
        let [a, b, c] = self.cells[cell];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [
            (pa[0] + pb[0] + pc[0]) / 3.0,
            (pa[1] + pb[1] + pc[1]) / 3.0,
        ]
    }

    /// Signed area of a cell; positive for counterclockwise orientation.
    pub fn signed_area(&self, cell: usize) -> f64 {
        let [a, b, c] = self.cells[cell];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    /// Gradients of the three barycentric basis functions on a cell.
    pub fn basis_gradients(&self, cell: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.cells[cell];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        let two_area = 2.0 * self.signed_area(cell);
        [
            [(pb[1] - pc[1]) / two_area, (pc[0] - pb[0]) / two_area],
            [(pc[1] - pa[1]) / two_area, (pa[0] - pc[0]) / two_area],
            [(pa[1] - pb[1]) / two_area, (pb[0] - pa[0]) / two_area],
        ]
    }

    /// Interpolates a function at every node.
    pub fn interpolate<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes.iter().map(|p| f(p[0], p[1])).collect()
    }

    /// Expands an interior vector to a full nodal vector with zero boundary trace.
    pub fn expand_interior(&self, interior: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.num_nodes()];
        for (k, &node) in self.interior_nodes.iter().enumerate() {
            full[node] = interior[k];
        }
        full
    }

    /// Restricts a full nodal vector to the interior nodes.
    pub fn restrict_interior(&self, full: &[f64]) -> Vec<f64> {
        self.interior_nodes.iter().map(|&node| full[node]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_mesh() {
        let m = Mesh::new(1).unwrap();
        assert_eq!(m.num_nodes(), 4);
        assert_eq!(m.num_cells(), 2);
        assert!(m.boundary_mask().iter().all(|&b| b));
        assert_eq!(m.num_interior(), 0);
    }

    #[test]
    fn two_by_two_has_center_node() {
        let m = Mesh::new(2).unwrap();
        assert_eq!(m.num_nodes(), 9);
        assert_eq!(m.num_cells(), 8);
        assert_eq!(m.interior_nodes(), &[4]);
        assert_eq!(m.nodes()[4], [0.5, 0.5]);
    }

    #[test]
    fn full_scale_counts() {
        let m = Mesh::new(64).unwrap();
        assert_eq!(m.num_nodes(), 4225);
        assert_eq!(m.num_cells(), 8192);
    }

    #[test]
    fn zero_resolution_rejected() {
        assert!(Mesh::new(0).is_err());
    }

    #[test]
    fn orientation_and_flags() {
        let m = Mesh::new(7).unwrap();
        for c in 0..m.num_cells() {
            let a = m.signed_area(c);
            assert!(a > 0.0);
            assert!((a - m.cell_area()).abs() < 1e-15);
        }
        for (k, p) in m.nodes().iter().enumerate() {
            let on_edge = p[0] == 0.0 || p[1] == 0.0 || p[0] == 1.0 || p[1] == 1.0;
            assert_eq!(on_edge, m.boundary_mask()[k]);
        }
    }
}
