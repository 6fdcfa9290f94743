use super::SparseOperator;
use crate::error::{invalid, Result, SaaError};

/// Lower band of a symmetric matrix.
///
/// Row `i` stores columns `i - bw ..= i` contiguously at
/// `data[i * (bw + 1) ..]`, with column `j` at offset `j + bw - i`. Entries
/// left of column 0 are padding and stay zero.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    dim: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(dim: usize, bw: usize) -> Self {
        Self {
            dim,
            bw,
            data: vec![0.0; dim * (bw + 1)],
        }
    }

    /// Copies the lower triangle of a symmetric operator.
    pub fn from_operator(op: &SparseOperator) -> Self {
        let mut band = Self::zeros(op.dim(), op.half_bandwidth());
        for i in 0..op.dim() {
            for (j, v) in op.csr().row(i) {
                if j <= i {
                    band.add(i, j, v);
                }
            }
        }
        band
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        i * (self.bw + 1) + j + self.bw - i
    }

    /// Adds `v` at `(i, j)`; requires `j <= i` and `i - j <= bw`.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i && i - j <= self.bw);
        let k = self.offset(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.offset(i, j)]
        }
    }

    /// In-place Cholesky factorization `A = L L^T` within the band.
    pub fn factor(mut self) -> Result<BandCholesky> {
        let (n, bw) = (self.dim, self.bw);
        let w = bw + 1;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let row_i = i * w + bw - i;
                let row_j = j * w + bw - j;
                let dot: f64 = self.data[row_i + k0..row_i + j]
                    .iter()
                    .zip(&self.data[row_j + k0..row_j + j])
                    .map(|(a, b)| a * b)
                    .sum();
                let s = self.data[row_i + j] - dot;
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(SaaError::NotPositiveDefinite { row: i, pivot: s });
                    }
                    self.data[row_i + i] = s.sqrt();
                } else {
                    self.data[row_i + j] = s / self.data[row_j + j];
                }
            }
        }
        Ok(BandCholesky { factor: self })
    }
}

/// Banded Cholesky factor of an SPD matrix.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    factor: BandMatrix,
}

impl BandCholesky {
    pub fn dim(&self) -> usize {
        self.factor.dim
    }

    /// Overwrites `x` (holding the right-hand side) with the solution.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw) = (self.factor.dim, self.factor.bw);
        let w = bw + 1;
        let l = &self.factor.data;
        for i in 0..n {
            let k0 = i.saturating_sub(bw);
            let row = i * w + bw - i;
            let dot: f64 = l[row + k0..row + i]
                .iter()
                .zip(&x[k0..i])
                .map(|(a, b)| a * b)
                .sum();
            x[i] = (x[i] - dot) / l[row + i];
        }
        for i in (0..n).rev() {
            let row = i * w + bw - i;
            x[i] /= l[row + i];
            let xi = x[i];
            let k0 = i.saturating_sub(bw);
            for (xk, lk) in x[k0..i].iter_mut().zip(&l[row + k0..row + i]) {
                *xk -= lk * xi;
            }
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn relative_residual(a: &SparseOperator, x: &[f64], rhs: &[f64]) -> f64 {
    let ax = a.apply(x);
    let r: Vec<f64> = ax.iter().zip(rhs).map(|(p, q)| p - q).collect();
    let nb = norm(rhs);
    if nb == 0.0 {
        norm(&r)
    } else {
        norm(&r) / nb
    }
}

/// Solves `A x = rhs` for SPD `A` by banded Cholesky, with one step of
/// iterative refinement when the residual misses `1e-12`. Falls back to
/// conjugate gradients if the factorization breaks down.
pub fn solve_spd(a: &SparseOperator, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != a.dim() {
        return invalid(format!(
            "right-hand side has {} entries, operator dimension {}",
            rhs.len(),
            a.dim()
        ));
    }
    if rhs.iter().all(|&v| v == 0.0) {
        return Ok(vec![0.0; a.dim()]);
    }
    let chol = match BandMatrix::from_operator(a).factor() {
        Ok(c) => c,
        Err(_) => return conjugate_gradient(a, rhs, 1e-12, 10 * a.dim().max(1)),
    };
    let mut x = chol.solve(rhs);
    if relative_residual(a, &x, rhs) > 1e-12 {
        let ax = a.apply(&x);
        let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, y)| b - y).collect();
        chol.solve_in_place(&mut r);
        x.iter_mut().zip(&r).for_each(|(xi, ri)| *xi += ri);
        let res = relative_residual(a, &x, rhs);
        if res > 1e-12 {
            return Err(SaaError::SolverFailure {
                iterations: 1,
                residual: res,
            });
        }
    }
    Ok(x)
}

/// Jacobi-preconditioned conjugate gradients, stopping at relative residual `rel_tol`.
pub fn conjugate_gradient(
    a: &SparseOperator,
    rhs: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = a.dim();
    if rhs.len() != n {
        return invalid("right-hand side length does not match operator");
    }
    let nb = norm(rhs);
    let mut x = vec![0.0; n];
    if nb == 0.0 {
        return Ok(x);
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        a.apply_into(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(SaaError::SolverFailure {
                iterations: it,
                residual: norm(&r) / nb,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) / nb <= rel_tol {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SaaError::SolverFailure {
        iterations: max_iter,
        residual: norm(&r) / nb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_fem::csr::TripletBuilder;
    use crate::mesh_fem::{assemble_stiffness, Mesh};

    fn diag_op(d: &[f64]) -> SparseOperator {
        let mut b = TripletBuilder::with_capacity((d.len(), d.len()), d.len());
        for (i, &v) in d.iter().enumerate() {
            b.add(i, i, v);
        }
        SparseOperator::from_csr(b.build()).unwrap()
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let mesh = Mesh::new(6).unwrap();
        let a = assemble_stiffness(&mesh, &vec![1.0; mesh.num_cells()]).unwrap();
        let x = solve_spd(&a, &vec![0.0; a.dim()]).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn diagonal_system() {
        let d = [2.0, 4.0, 0.5, 8.0];
        let rhs = [1.0, -2.0, 3.0, 4.0];
        let x = solve_spd(&diag_op(&d), &rhs).unwrap();
        for i in 0..4 {
            assert!((x[i] - rhs[i] / d[i]).abs() < 1e-15);
        }
        let y = conjugate_gradient(&diag_op(&d), &rhs, 1e-12, 40).unwrap();
        for i in 0..4 {
            assert!((y[i] - rhs[i] / d[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn cholesky_and_cg_agree_with_small_residual() {
        let mesh = Mesh::new(12).unwrap();
        let kappa: Vec<f64> = (0..mesh.num_cells())
            .map(|c| 0.5 + ((c * 37) % 11) as f64 / 7.0)
            .collect();
        let a = assemble_stiffness(&mesh, &kappa).unwrap();
        let rhs: Vec<f64> = (0..a.dim()).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
        let x = solve_spd(&a, &rhs).unwrap();
        assert!(relative_residual(&a, &x, &rhs) <= 1e-12);
        let y = conjugate_gradient(&a, &rhs, 1e-12, 10 * a.dim()).unwrap();
        assert!(relative_residual(&a, &y, &rhs) <= 1e-12);
        let diff = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-9 * norm(&x));
    }

    #[test]
    fn indefinite_matrix_reports_pivot() {
        let band = BandMatrix::from_operator(&diag_op(&[1.0, -1.0]));
        assert!(matches!(
            band.factor(),
            Err(SaaError::NotPositiveDefinite { row: 1, .. })
        ));
    }

    #[test]
    fn cg_reports_nonconvergence() {
        let mesh = Mesh::new(16).unwrap();
        let a = assemble_stiffness(&mesh, &vec![1.0; mesh.num_cells()]).unwrap();
        let rhs = vec![1.0; a.dim()];
        match conjugate_gradient(&a, &rhs, 1e-12, 3) {
            Err(SaaError::SolverFailure { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
