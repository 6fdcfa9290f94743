use super::csr::{CsrMatrix, TripletBuilder};
use super::Mesh;
use crate::error::{invalid, Result, SaaError};

/// Square sparse matrix in CSR storage.
///
/// Stiffness and reaction operators are reduced to the interior nodes (rows and
/// columns of boundary nodes eliminated); mass operators act on all nodes.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    mat: CsrMatrix,
}

impl SparseOperator {
    pub fn from_csr(mat: CsrMatrix) -> Result<Self> {
        if mat.rows() != mat.cols() {
            return invalid(format!(
                "operator must be square, got {}x{}",
                mat.rows(),
                mat.cols()
            ));
        }
        Ok(Self { mat })
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn csr(&self) -> &CsrMatrix {
        &self.mat
    }

    pub fn nnz(&self) -> usize {
        self.mat.nnz()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat.get(i, j).unwrap_or(0.0)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.mat.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `x^T A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        (0..self.dim())
            .map(|i| x[i] * self.mat.row(i).map(|(j, v)| v * x[j]).sum::<f64>())
            .sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.data().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest `|A_ij - A_ji|` over the stored pattern.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.dim() {
            for (j, v) in self.mat.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            mat: self.mat.map(|v| c * v),
        }
    }

    pub fn add(&self, other: &SparseOperator) -> Result<Self> {
        if self.dim() != other.dim() {
            return invalid(format!(
                "dimension mismatch: {} vs {}",
                self.dim(),
                other.dim()
            ));
        }
        Ok(Self {
            mat: self.mat.add(&other.mat),
        })
    }

    /// Largest column offset from the diagonal over the stored pattern.
    pub fn half_bandwidth(&self) -> usize {
        let mut bw = 0;
        for i in 0..self.dim() {
            for (j, _) in self.mat.row(i) {
                bw = bw.max(i.abs_diff(j));
            }
        }
        bw
    }
}

/// Rectangular node-by-cell operator `M[i][c] = ∫_c φ_i`, acting on all nodes.
#[derive(Debug, Clone)]
pub struct MixedOperator {
    mat: CsrMatrix,
}

impl MixedOperator {
    pub fn rows(&self) -> usize {
        self.mat.rows()
    }

    pub fn cols(&self) -> usize {
        self.mat.cols()
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows()];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.mat.row(i).map(|(c, v)| v * u[c]).sum();
        }
        y
    }

    pub fn apply_transpose(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols()];
        for (i, &pi) in p.iter().enumerate().take(self.rows()) {
            for (c, v) in self.mat.row(i) {
                out[c] += v * pi;
            }
        }
        out
    }
}

/// P1 element mass matrix factor: `area / 12 * [[2,1,1],[1,2,1],[1,1,2]]`.
pub(crate) fn element_mass(area: f64, a: usize, b: usize) -> f64 {
    if a == b {
        area / 6.0
    } else {
        area / 12.0
    }
}

fn check_cell_vector(mesh: &Mesh, v: &[f64], what: &str) -> Result<()> {
    if v.len() != mesh.num_cells() {
        return invalid(format!(
            "{what} has {} entries, mesh has {} cells",
            v.len(),
            mesh.num_cells()
        ));
    }
    Ok(())
}

fn reduced_from_elements<F>(mesh: &Mesh, mut local: F) -> Result<SparseOperator>
where
    F: FnMut(usize, usize, usize) -> f64,
{
    let dim = mesh.num_interior();
    let mut tri = TripletBuilder::with_capacity((dim, dim), 9 * mesh.num_cells());
    for (c, cell) in mesh.cells().iter().enumerate() {
        for a in 0..3 {
            let Some(ia) = mesh.interior_index(cell[a]) else {
                continue;
            };
            for b in 0..3 {
                if let Some(ib) = mesh.interior_index(cell[b]) {
                    tri.add(ia, ib, local(c, a, b));
                }
            }
        }
    }
    SparseOperator::from_csr(tri.build())
}

/// Stiffness matrix `A[i][j] = Σ_c κ_c ∫_c ∇φ_i·∇φ_j` over interior nodes.
pub fn assemble_stiffness(mesh: &Mesh, kappa_cell: &[f64]) -> Result<SparseOperator> {
    check_cell_vector(mesh, kappa_cell, "kappa")?;
    if let Some((cell, &value)) = kappa_cell
        .iter()
        .enumerate()
        .find(|(_, &k)| !(k > 0.0 && k.is_finite()))
    {
        return Err(SaaError::CoefficientPositivity { cell, value });
    }
    let area = mesh.cell_area();
    let grads: Vec<[[f64; 2]; 3]> = (0..mesh.num_cells())
        .map(|c| mesh.basis_gradients(c))
        .collect();
    reduced_from_elements(mesh, |c, a, b| {
        let (ga, gb) = (grads[c][a], grads[c][b]);
        kappa_cell[c] * area * (ga[0] * gb[0] + ga[1] * gb[1])
    })
}

/// Consistent P1 mass matrix over all nodes.
pub fn assemble_mass_p1(mesh: &Mesh) -> SparseOperator {
    let nn = mesh.num_nodes();
    let area = mesh.cell_area();
    let mut tri = TripletBuilder::with_capacity((nn, nn), 9 * mesh.num_cells());
    for cell in mesh.cells() {
        for a in 0..3 {
            for b in 0..3 {
                tri.add(cell[a], cell[b], element_mass(area, a, b));
            }
        }
    }
    SparseOperator { mat: tri.build() }
}

/// Mixed P0-P1 mass operator, `M[i][c] = ∫_c φ_i = area / 3` for vertices of `c`.
pub fn assemble_mixed_p0_p1(mesh: &Mesh) -> MixedOperator {
    let area = mesh.cell_area();
    let mut tri = TripletBuilder::with_capacity((mesh.num_nodes(), mesh.num_cells()), 3 * mesh.num_cells());
    for (c, cell) in mesh.cells().iter().enumerate() {
        for &node in cell {
            tri.add(node, c, area / 3.0);
        }
    }
    MixedOperator { mat: tri.build() }
}

/// Reaction matrix `R[i][j] = Σ_c u_c ∫_c φ_i φ_j` over interior nodes.
pub fn assemble_reaction(mesh: &Mesh, u: &[f64]) -> Result<SparseOperator> {
    check_cell_vector(mesh, u, "control")?;
    if let Some((c, v)) = u.iter().enumerate().find(|(_, &v)| !(v >= 0.0)) {
        return Err(SaaError::ModelAdmissibility(format!(
            "reaction coefficient must be nonnegative, found {v} on cell {c}"
        )));
    }
    let area = mesh.cell_area();
    reduced_from_elements(mesh, |c, a, b| u[c] * element_mass(area, a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_node_stiffness_is_four() {
        let mesh = Mesh::new(2).unwrap();
        let a = assemble_stiffness(&mesh, &vec![1.0; mesh.num_cells()]).unwrap();
        assert_eq!(a.dim(), 1);
        assert!((a.get(0, 0) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn stiffness_scales_linearly() {
        let mesh = Mesh::new(5).unwrap();
        let a = assemble_stiffness(&mesh, &vec![1.0; mesh.num_cells()]).unwrap();
        let b = assemble_stiffness(&mesh, &vec![3.5; mesh.num_cells()]).unwrap();
        for i in 0..a.dim() {
            for j in 0..a.dim() {
                assert!((3.5 * a.get(i, j) - b.get(i, j)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn stiffness_is_symmetric_with_positive_diagonal() {
        let mesh = Mesh::new(9).unwrap();
        let kappa: Vec<f64> = (0..mesh.num_cells()).map(|c| 1.0 + (c % 7) as f64 * 0.3).collect();
        let a = assemble_stiffness(&mesh, &kappa).unwrap();
        assert!(a.max_asymmetry() <= 1e-14 * a.max_abs());
        assert!(a.diagonal().iter().all(|&d| d > 0.0));
        // row-major interior numbering couples node k to k + (n - 1) + 1
        assert_eq!(a.half_bandwidth(), mesh.n());
    }

    #[test]
    fn nonpositive_kappa_rejected() {
        let mesh = Mesh::new(3).unwrap();
        let mut kappa = vec![1.0; mesh.num_cells()];
        kappa[4] = 0.0;
        match assemble_stiffness(&mesh, &kappa) {
            Err(SaaError::CoefficientPositivity { cell, .. }) => assert_eq!(cell, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mass_total_is_domain_area() {
        let mesh = Mesh::new(11).unwrap();
        let m = assemble_mass_p1(&mesh);
        let ones = vec![1.0; mesh.num_nodes()];
        let total: f64 = m.apply(&ones).iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(m.max_asymmetry() == 0.0);
    }

    #[test]
    fn mixed_of_one_is_load_vector() {
        let mesh = Mesh::new(4).unwrap();
        let mixed = assemble_mixed_p0_p1(&mesh);
        let mass = assemble_mass_p1(&mesh);
        let lhs = mixed.apply(&vec![1.0; mesh.num_cells()]);
        // load vector of the constant 1 is M * 1
        let rhs = mass.apply(&vec![1.0; mesh.num_nodes()]);
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn reaction_of_zero_is_zero() {
        let mesh = Mesh::new(4).unwrap();
        let r = assemble_reaction(&mesh, &vec![0.0; mesh.num_cells()]).unwrap();
        assert_eq!(r.max_abs(), 0.0);
    }

    #[test]
    fn reaction_rejects_negative_and_wrong_length() {
        let mesh = Mesh::new(2).unwrap();
        let mut u = vec![0.5; mesh.num_cells()];
        u[1] = -0.1;
        assert!(matches!(
            assemble_reaction(&mesh, &u),
            Err(SaaError::ModelAdmissibility(_))
        ));
        assert!(matches!(
            assemble_reaction(&mesh, &[1.0]),
            Err(SaaError::InvalidArgument(_))
        ));
    }
}
