//! Per-sample state and adjoint solves for the affine-linear and bilinear
//! control problems, and exact gradients of the discrete tracking objective.

use std::borrow::Cow;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SaaError};
use crate::mesh_fem::{
    assemble_mass_p1, assemble_mixed_p0_p1, assemble_stiffness, element_mass, BandCholesky,
    BandMatrix, Mesh, MixedOperator, SparseOperator,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PdeKind {
    /// `-div(κ ∇y) = u`, no additional source.
    AffineLinear,
    /// `-div(κ ∇y) + u y = b`, requires `u ≥ 0`.
    Bilinear,
}

impl PdeKind {
    pub fn name(self) -> &'static str {
        match self {
            PdeKind::AffineLinear => "affine-linear",
            PdeKind::Bilinear => "bilinear",
        }
    }
}

/// Piecewise-constant control, one value per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField {
    pub values: Vec<f64>,
}

impl ControlField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(num_cells: usize) -> Self {
        Self {
            values: vec![0.0; num_cells],
        }
    }

    pub fn constant(num_cells: usize, v: f64) -> Self {
        Self {
            values: vec![v; num_cells],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `L2` inner product for equal-area cells.
    pub fn inner(&self, other: &ControlField, cell_area: f64) -> f64 {
        cell_area
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    pub fn l1_norm(&self, cell_area: f64) -> f64 {
        cell_area * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn l1_distance(&self, other: &ControlField, cell_area: f64) -> f64 {
        cell_area
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
    }

    /// `self + s (other - self)`.
    pub fn lerp(&self, other: &ControlField, s: f64) -> ControlField {
        ControlField::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * (b - a))
                .collect(),
        )
    }
}

/// Continuous piecewise-linear state, one value per node, zero on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub values: Vec<f64>,
}

/// Desired state, source, L1 weight, and control bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    /// Desired state interpolated at the nodes.
    pub y_d: Vec<f64>,
    /// Source interpolated at the nodes; ignored by the affine-linear model.
    pub b: Vec<f64>,
    pub beta: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn default_desired_state(x: f64, y: f64) -> f64 {
    (2.0 * PI * x).sin() * (2.0 * PI * y).sin() * (2.0 * x).exp() / 6.0
}

pub fn default_source(x: f64, y: f64) -> f64 {
    10.0 * (2.0 * PI * x - y).sin() * (2.0 * PI * y).cos()
}

impl ProblemData {
    pub fn from_functions<Fy, Fb>(
        mesh: &Mesh,
        y_d: Fy,
        b: Fb,
        beta: f64,
        lower: f64,
        upper: f64,
    ) -> Self
    where
        Fy: Fn(f64, f64) -> f64,
        Fb: Fn(f64, f64) -> f64,
    {
        Self {
            y_d: mesh.interpolate(y_d),
            b: mesh.interpolate(b),
            beta,
            lower,
            upper,
        }
    }

    /// Experiment defaults: `β = 0.0075`, bounds `[-1, 1]` for the affine-linear
    /// model and `β = 0.00055`, bounds `[0, 1]` for the bilinear model.
    pub fn experiment_default(kind: PdeKind, mesh: &Mesh) -> Self {
        let (beta, lower, upper) = match kind {
            PdeKind::AffineLinear => (0.0075, -1.0, 1.0),
            PdeKind::Bilinear => (0.00055, 0.0, 1.0),
        };
        Self::from_functions(mesh, default_desired_state, default_source, beta, lower, upper)
    }

    pub fn validate(&self, kind: PdeKind, mesh: &Mesh) -> Result<()> {
        if self.y_d.len() != mesh.num_nodes() || self.b.len() != mesh.num_nodes() {
            return invalid("problem data does not match the mesh");
        }
        if !(self.beta >= 0.0) {
            return invalid(format!("beta must be nonnegative, got {}", self.beta));
        }
        if !(self.lower <= 0.0 && 0.0 <= self.upper) {
            return invalid(format!(
                "bounds must satisfy lower <= 0 <= upper, got [{}, {}]",
                self.lower, self.upper
            ));
        }
        if kind == PdeKind::Bilinear && self.lower < 0.0 {
            return Err(SaaError::ModelAdmissibility(format!(
                "bilinear model requires lower bound >= 0, got {}",
                self.lower
            )));
        }
        Ok(())
    }

    pub fn contains(&self, u: &ControlField) -> bool {
        u.values
            .iter()
            .all(|&v| v >= self.lower && v <= self.upper)
    }
}

/// Operators shared by every sample: the mesh, mass matrices, and the data.
#[derive(Debug, Clone)]
pub struct PdeModel {
    kind: PdeKind,
    mesh: Mesh,
    data: ProblemData,
    mass: SparseOperator,
    mixed: MixedOperator,
    cell_interior: Vec<[Option<usize>; 3]>,
}

/// Per-sample operator: a cached Cholesky factor for the affine-linear model
/// (the operator does not depend on the control), or the stiffness band for
/// the bilinear model, which is refactored with the reaction term per control.
#[derive(Debug, Clone)]
pub enum SampleSystem {
    Affine(BandCholesky),
    Bilinear(BandMatrix),
}

/// State of one sample at one control.
#[derive(Debug, Clone)]
pub struct SampleState {
    /// Full nodal state.
    pub y: Vec<f64>,
    pub objective: f64,
}

impl PdeModel {
    pub fn new(kind: PdeKind, mesh: Mesh, data: ProblemData) -> Result<Self> {
        data.validate(kind, &mesh)?;
        let mass = assemble_mass_p1(&mesh);
        let mixed = assemble_mixed_p0_p1(&mesh);
        let cell_interior = mesh
            .cells()
            .iter()
            .map(|c| c.map(|node| mesh.interior_index(node)))
            .collect();
        Ok(Self {
            kind,
            mesh,
            data,
            mass,
            mixed,
            cell_interior,
        })
    }

    pub fn kind(&self) -> PdeKind {
        self.kind
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn data(&self) -> &ProblemData {
        &self.data
    }

    pub fn mass(&self) -> &SparseOperator {
        &self.mass
    }

    pub fn check_control(&self, u: &ControlField) -> Result<()> {
        if u.len() != self.mesh.num_cells() {
            return invalid(format!(
                "control has {} cells, mesh has {}",
                u.len(),
                self.mesh.num_cells()
            ));
        }
        if u.values.iter().any(|v| !v.is_finite()) {
            return invalid("control has non-finite entries");
        }
        if self.kind == PdeKind::Bilinear {
            if let Some((c, v)) = u.values.iter().enumerate().find(|(_, &v)| v < 0.0) {
                return Err(SaaError::ModelAdmissibility(format!(
                    "bilinear control must be nonnegative, found {v} on cell {c}"
                )));
            }
        }
        Ok(())
    }

    /// Builds the per-sample operator for a coefficient field.
    pub fn system(&self, kappa_cell: &[f64]) -> Result<SampleSystem> {
        let stiffness = assemble_stiffness(&self.mesh, kappa_cell)?;
        let band = BandMatrix::from_operator(&stiffness);
        Ok(match self.kind {
            PdeKind::AffineLinear => SampleSystem::Affine(band.factor()?),
            PdeKind::Bilinear => SampleSystem::Bilinear(band),
        })
    }

    /// Factor of the state operator at control `u`.
    pub fn factor<'a>(&self, sys: &'a SampleSystem, u: &ControlField) -> Result<Cow<'a, BandCholesky>> {
        match sys {
            SampleSystem::Affine(f) => Ok(Cow::Borrowed(f)),
            SampleSystem::Bilinear(band) => {
                let mut band = band.clone();
                let area = self.mesh.cell_area();
                for (c, nodes) in self.cell_interior.iter().enumerate() {
                    let uc = u.values[c];
                    if uc == 0.0 {
                        continue;
                    }
                    for a in 0..3 {
                        let Some(ia) = nodes[a] else { continue };
                        for b in 0..3 {
                            let Some(ib) = nodes[b] else { continue };
                            if ib <= ia {
                                band.add(ia, ib, uc * element_mass(area, a, b));
                            }
                        }
                    }
                }
                Ok(Cow::Owned(band.factor()?))
            }
        }
    }

    fn state_rhs(&self, u: &ControlField) -> Vec<f64> {
        match self.kind {
            PdeKind::AffineLinear => self.mesh.restrict_interior(&self.mixed.apply(&u.values)),
            PdeKind::Bilinear => self.mesh.restrict_interior(&self.mass.apply(&self.data.b)),
        }
    }

    /// `(1/2) (y - y_d)^T M (y - y_d)` for a full nodal state.
    pub fn tracking(&self, y: &[f64]) -> f64 {
        let e: Vec<f64> = y.iter().zip(&self.data.y_d).map(|(a, b)| a - b).collect();
        0.5 * self.mass.quadratic_form(&e)
    }

    /// State for a given factor; exposed so that linear combinations of
    /// affine-linear states can be formed without further solves.
    pub fn state_with(&self, factor: &BandCholesky, u: &ControlField) -> SampleState {
        let mut rhs = self.state_rhs(u);
        factor.solve_in_place(&mut rhs);
        let y = self.mesh.expand_interior(&rhs);
        let objective = self.tracking(&y);
        SampleState { y, objective }
    }

    /// L2 gradient representative (per-cell averages) given the state.
    pub fn gradient_with(&self, factor: &BandCholesky, y: &[f64]) -> Vec<f64> {
        let e: Vec<f64> = y.iter().zip(&self.data.y_d).map(|(a, b)| a - b).collect();
        let mut p = self.mesh.restrict_interior(&self.mass.apply(&e));
        factor.solve_in_place(&mut p);
        let p = self.mesh.expand_interior(&p);
        match self.kind {
            PdeKind::AffineLinear => self
                .mesh
                .cells()
                .iter()
                .map(|c| (p[c[0]] + p[c[1]] + p[c[2]]) / 3.0)
                .collect(),
            PdeKind::Bilinear => self
                .mesh
                .cells()
                .iter()
                .map(|c| {
                    // (1/area) ∫_c p y with the P1 element mass weights
                    let mut s = 0.0;
                    for a in 0..3 {
                        for b in 0..3 {
                            let w = if a == b { 1.0 / 6.0 } else { 1.0 / 12.0 };
                            s += w * p[c[a]] * y[c[b]];
                        }
                    }
                    -s
                })
                .collect(),
        }
    }

    pub fn solve_state(&self, kappa_cell: &[f64], u: &ControlField) -> Result<StateField> {
        self.check_control(u)?;
        let sys = self.system(kappa_cell)?;
        let factor = self.factor(&sys, u)?;
        Ok(StateField {
            values: self.state_with(&factor, u).y,
        })
    }

    pub fn objective_sample(&self, kappa_cell: &[f64], u: &ControlField) -> Result<f64> {
        self.check_control(u)?;
        let sys = self.system(kappa_cell)?;
        let factor = self.factor(&sys, u)?;
        Ok(self.state_with(&factor, u).objective)
    }

    pub fn gradient_sample(&self, kappa_cell: &[f64], u: &ControlField) -> Result<ControlField> {
        self.check_control(u)?;
        let sys = self.system(kappa_cell)?;
        let factor = self.factor(&sys, u)?;
        let st = self.state_with(&factor, u);
        Ok(ControlField::new(self.gradient_with(&factor, &st.y)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(kind: PdeKind, n: usize) -> PdeModel {
        let mesh = Mesh::new(n).unwrap();
        let data = ProblemData::experiment_default(kind, &mesh);
        PdeModel::new(kind, mesh, data).unwrap()
    }

    #[test]
    fn affine_zero_control_zero_state() {
        let m = model(PdeKind::AffineLinear, 6);
        let kappa = vec![1.3; m.mesh().num_cells()];
        let y = m.solve_state(&kappa, &ControlField::zeros(m.mesh().num_cells())).unwrap();
        assert!(y.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bilinear_zero_control_is_diffusion_solve() {
        let m = model(PdeKind::Bilinear, 6);
        let kappa = vec![0.8; m.mesh().num_cells()];
        let y = m.solve_state(&kappa, &ControlField::zeros(m.mesh().num_cells())).unwrap();
        let a = assemble_stiffness(m.mesh(), &kappa).unwrap();
        let rhs = m.mesh().restrict_interior(&m.mass().apply(&m.data().b));
        let direct = crate::mesh_fem::solve_spd(&a, &rhs).unwrap();
        let yi = m.mesh().restrict_interior(&y.values);
        for (p, q) in yi.iter().zip(&direct) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_trace_is_zero() {
        let m = model(PdeKind::Bilinear, 5);
        let kappa = vec![1.0; m.mesh().num_cells()];
        let y = m
            .solve_state(&kappa, &ControlField::constant(m.mesh().num_cells(), 0.5))
            .unwrap();
        for (k, &b) in m.mesh().boundary_mask().iter().enumerate() {
            if b {
                assert_eq!(y.values[k], 0.0);
            }
        }
    }

    #[test]
    fn bilinear_rejects_negative_controls() {
        let m = model(PdeKind::Bilinear, 3);
        let mut u = ControlField::zeros(m.mesh().num_cells());
        u.values[0] = -1e-3;
        let kappa = vec![1.0; m.mesh().num_cells()];
        assert!(matches!(
            m.objective_sample(&kappa, &u),
            Err(SaaError::ModelAdmissibility(_))
        ));
    }

    #[test]
    fn bilinear_rejects_negative_lower_bound() {
        let mesh = Mesh::new(3).unwrap();
        let data = ProblemData::experiment_default(PdeKind::AffineLinear, &mesh);
        assert!(PdeModel::new(PdeKind::Bilinear, mesh, data).is_err());
    }

    #[test]
    fn stationary_when_target_is_reachable() {
        // y_d equal to the state of u = 0, i.e. zero for the affine-linear model
        let mesh = Mesh::new(6).unwrap();
        let data = ProblemData::from_functions(&mesh, |_, _| 0.0, |_, _| 0.0, 0.01, -1.0, 1.0);
        let m = PdeModel::new(PdeKind::AffineLinear, mesh, data).unwrap();
        let kappa = vec![2.0; m.mesh().num_cells()];
        let g = m
            .gradient_sample(&kappa, &ControlField::zeros(m.mesh().num_cells()))
            .unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
    }
}
