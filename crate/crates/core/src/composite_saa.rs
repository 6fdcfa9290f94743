//! Sample average approximation of the composite objective
//! `Ĝ_N(u) = (1/N) Σ_i J(S(u, ξ^i)) + β ||u||_{L1} + I_[l, u](u)`,
//! its gradient, the linear minimization oracle, and the gap functional.

use std::borrow::Cow;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::mesh_fem::Mesh;
use crate::pde_models::{ControlField, PdeKind, PdeModel, ProblemData, SampleSystem};
use crate::random_field::{CellField, KlFieldSpec, SampleSet};

/// Per-sample operators are cached when their total size stays below this.
pub const DEFAULT_CACHE_BYTES: usize = 1 << 30;

const CHUNK: usize = 256;

/// One SAA instance: model, random field, and samples.
#[derive(Debug)]
pub struct CompositeProblem {
    model: PdeModel,
    spec: KlFieldSpec,
    samples: SampleSet,
    field: CellField,
    systems: Option<Vec<SampleSystem>>,
}

/// Smooth value, composite value, and optionally gradient and states at one control.
#[derive(Debug, Clone)]
pub struct Evaluation {
    /// `F̂_N(Bu)`.
    pub smooth: f64,
    /// `ψ(u)`.
    pub psi: f64,
    pub gradient: Option<ControlField>,
    /// Per-sample nodal states, in sample order; empty unless requested.
    pub states: Vec<Vec<f64>>,
}

impl Evaluation {
    pub fn objective(&self) -> f64 {
        self.smooth + self.psi
    }
}

/// Result of the gap functional at a control.
#[derive(Debug, Clone)]
pub struct GapCertificate {
    pub gap: f64,
    /// Linear minimization oracle point `v`.
    pub minimizer: ControlField,
    /// `<∇F̂_N, u - v>`.
    pub inner_term: f64,
    /// `ψ(u) - ψ(v)`.
    pub psi_diff: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Want {
    gradient: bool,
    states: bool,
}

struct SampleOut {
    objective: f64,
    gradient: Option<Vec<f64>>,
    state: Option<Vec<f64>>,
}

/// `β Σ area |u_c|`, or `+∞` outside the box.
pub fn psi(u: &ControlField, beta: f64, lower: f64, upper: f64, cell_area: f64) -> f64 {
    if u.values.iter().any(|&v| !(v >= lower && v <= upper)) {
        return f64::INFINITY;
    }
    beta * u.l1_norm(cell_area)
}

/// Cellwise minimizer of `g v + β |v|` over `[lower, upper]`.
///
/// The objective is piecewise linear in `v`, so one of `{0, lower, upper}` is
/// optimal; ties are broken in that order.
pub fn lmo(grad: &ControlField, beta: f64, lower: f64, upper: f64) -> Result<ControlField> {
    if !(lower <= 0.0 && 0.0 <= upper) {
        return invalid(format!("bounds must satisfy lower <= 0 <= upper, got [{lower}, {upper}]"));
    }
    if !(beta >= 0.0) {
        return invalid("beta must be nonnegative");
    }
    Ok(ControlField::new(
        grad.values
            .iter()
            .map(|&g| lmo_cell(g, beta, lower, upper))
            .collect(),
    ))
}

#[inline]
pub fn lmo_cell(g: f64, beta: f64, lower: f64, upper: f64) -> f64 {
    let score = |v: f64| g * v + beta * v.abs();
    let mut best = 0.0;
    let mut best_score = 0.0;
    for cand in [lower, upper] {
        let s = score(cand);
        if s < best_score {
            best = cand;
            best_score = s;
        }
    }
    best
}

impl CompositeProblem {
    pub fn new(
        kind: PdeKind,
        data: ProblemData,
        spec: KlFieldSpec,
        samples: SampleSet,
        mesh: Mesh,
    ) -> Result<Self> {
        Self::with_cache_limit(kind, data, spec, samples, mesh, DEFAULT_CACHE_BYTES)
    }

    /// Like `new`, caching per-sample operators only if they fit in `cache_bytes`.
    pub fn with_cache_limit(
        kind: PdeKind,
        data: ProblemData,
        spec: KlFieldSpec,
        samples: SampleSet,
        mesh: Mesh,
        cache_bytes: usize,
    ) -> Result<Self> {
        if samples.dim() != spec.dim() {
            return invalid(format!(
                "samples have dimension {}, field has {} terms",
                samples.dim(),
                spec.dim()
            ));
        }
        let field = CellField::new(&spec, &mesh);
        let band_bytes = mesh.num_interior() * (mesh.n() + 1) * std::mem::size_of::<f64>();
        let model = PdeModel::new(kind, mesh, data)?;
        let mut problem = Self {
            model,
            spec,
            samples,
            field,
            systems: None,
        };
        if band_bytes.saturating_mul(problem.samples.len()) <= cache_bytes {
            let systems = (0..problem.samples.len())
                .into_par_iter()
                .map(|i| problem.build_system(i))
                .collect::<Result<Vec<_>>>()?;
            problem.systems = Some(systems);
        }
        Ok(problem)
    }

    pub fn kind(&self) -> PdeKind {
        self.model.kind()
    }

    pub fn model(&self) -> &PdeModel {
        &self.model
    }

    pub fn mesh(&self) -> &Mesh {
        self.model.mesh()
    }

    pub fn data(&self) -> &ProblemData {
        self.model.data()
    }

    pub fn spec(&self) -> &KlFieldSpec {
        &self.spec
    }

    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    pub fn num_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn cell_area(&self) -> f64 {
        self.mesh().cell_area()
    }

    pub fn is_cached(&self) -> bool {
        self.systems.is_some()
    }

    pub fn kappa(&self, i: usize) -> Result<Vec<f64>> {
        self.field.evaluate(&self.samples.samples()[i])
    }

    fn build_system(&self, i: usize) -> Result<SampleSystem> {
        self.model.system(&self.kappa(i)?)
    }

    fn system(&self, i: usize) -> Result<Cow<'_, SampleSystem>> {
        match &self.systems {
            Some(s) => Ok(Cow::Borrowed(&s[i])),
            None => Ok(Cow::Owned(self.build_system(i)?)),
        }
    }

    pub fn psi(&self, u: &ControlField) -> f64 {
        let d = self.data();
        psi(u, d.beta, d.lower, d.upper, self.cell_area())
    }

    pub fn is_feasible(&self, u: &ControlField) -> bool {
        u.len() == self.mesh().num_cells() && self.data().contains(u)
    }

    fn check_dims(&self, u: &ControlField) -> Result<()> {
        if u.len() != self.mesh().num_cells() {
            return invalid(format!(
                "control has {} cells, mesh has {}",
                u.len(),
                self.mesh().num_cells()
            ));
        }
        Ok(())
    }

    fn sample_out(&self, i: usize, u: &ControlField, want: Want) -> Result<SampleOut> {
        let sys = self.system(i)?;
        let factor = self.model.factor(&sys, u)?;
        let st = self.model.state_with(&factor, u);
        let gradient = want
            .gradient
            .then(|| self.model.gradient_with(&factor, &st.y));
        Ok(SampleOut {
            objective: st.objective,
            gradient,
            state: want.states.then_some(st.y),
        })
    }

    /// Runs `work` on every sample in parallel and folds the results in
    /// sample order, so the reduction is independent of scheduling.
    fn reduce<F>(&self, want: Want, work: F) -> Result<(f64, Option<ControlField>, Vec<Vec<f64>>)>
    where
        F: Fn(usize) -> Result<SampleOut> + Sync,
    {
        let n = self.num_samples();
        let cells = self.mesh().num_cells();
        let mut smooth = 0.0;
        let mut grad = want.gradient.then(|| vec![0.0; cells]);
        let mut states = Vec::new();
        let idx: Vec<usize> = (0..n).collect();
        for chunk in idx.chunks(CHUNK) {
            let outs = chunk
                .par_iter()
                .map(|&i| work(i))
                .collect::<Result<Vec<_>>>()?;
            for out in outs {
                smooth += out.objective;
                if let (Some(acc), Some(g)) = (grad.as_mut(), out.gradient) {
                    acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                }
                if let Some(y) = out.state {
                    states.push(y);
                }
            }
        }
        let inv = 1.0 / n as f64;
        let grad = grad.map(|g| ControlField::new(g.into_iter().map(|v| v * inv).collect()));
        Ok((smooth * inv, grad, states))
    }

    fn evaluate_with(&self, u: &ControlField, want: Want) -> Result<Evaluation> {
        self.check_dims(u)?;
        self.model.check_control(u)?;
        let (smooth, gradient, states) = self.reduce(want, |i| self.sample_out(i, u, want))?;
        Ok(Evaluation {
            smooth,
            psi: self.psi(u),
            gradient,
            states,
        })
    }

    /// Objective and gradient.
    pub fn evaluate(&self, u: &ControlField) -> Result<Evaluation> {
        self.evaluate_with(
            u,
            Want {
                gradient: true,
                states: false,
            },
        )
    }

    /// Objective, gradient, and per-sample states.
    pub fn evaluate_full(&self, u: &ControlField) -> Result<Evaluation> {
        self.evaluate_with(
            u,
            Want {
                gradient: true,
                states: true,
            },
        )
    }

    /// Objective and per-sample states, no adjoint solves.
    pub fn evaluate_states(&self, u: &ControlField) -> Result<Evaluation> {
        self.evaluate_with(
            u,
            Want {
                gradient: false,
                states: true,
            },
        )
    }

    /// Smooth value and gradient from given affine-linear states, using only
    /// adjoint solves.
    pub fn gradient_from_states(&self, states: &[Vec<f64>]) -> Result<(f64, ControlField)> {
        if self.kind() != PdeKind::AffineLinear {
            return invalid("state reuse is only valid for the affine-linear model");
        }
        if states.len() != self.num_samples() {
            return invalid("one state per sample required");
        }
        let want = Want {
            gradient: true,
            states: false,
        };
        let (smooth, grad, _) = self.reduce(want, |i| {
            let sys = self.system(i)?;
            let SampleSystem::Affine(factor) = sys.as_ref() else {
                unreachable!("affine-linear problem holds affine systems")
            };
            Ok(SampleOut {
                objective: self.model.tracking(&states[i]),
                gradient: Some(self.model.gradient_with(factor, &states[i])),
                state: None,
            })
        })?;
        Ok((smooth, grad.expect("gradient requested")))
    }

    /// `Ĝ_N(u)`, or `+∞` if `u` violates the bounds.
    pub fn saa_objective(&self, u: &ControlField) -> Result<f64> {
        self.check_dims(u)?;
        if !self.data().contains(u) {
            return Ok(f64::INFINITY);
        }
        Ok(self
            .evaluate_with(u, Want::default())?
            .objective())
    }

    /// Gradient of the smooth part, `(1/N) Σ_i ∇g_{ξ^i}(u)`.
    pub fn saa_gradient(&self, u: &ControlField) -> Result<ControlField> {
        Ok(self.evaluate(u)?.gradient.expect("gradient requested"))
    }

    pub fn lmo(&self, grad: &ControlField) -> Result<ControlField> {
        let d = self.data();
        lmo(grad, d.beta, d.lower, d.upper)
    }

    /// Gap certificate for a known gradient at `u`.
    pub fn gap_from_gradient(&self, u: &ControlField, grad: &ControlField) -> Result<GapCertificate> {
        if !self.is_feasible(u) {
            return invalid("gap requires a feasible control");
        }
        let v = self.lmo(grad)?;
        let area = self.cell_area();
        let inner_term = area
            * grad
                .values
                .iter()
                .zip(u.values.iter().zip(&v.values))
                .map(|(g, (a, b))| g * (a - b))
                .sum::<f64>();
        let psi_diff = self.psi(u) - self.psi(&v);
        Ok(GapCertificate {
            gap: inner_term + psi_diff,
            minimizer: v,
            inner_term,
            psi_diff,
        })
    }

    /// `Ψ̂_N(u) = sup_v <∇F̂_N(u), u - v> + ψ(u) - ψ(v)`.
    pub fn gap(&self, u: &ControlField) -> Result<GapCertificate> {
        if !self.is_feasible(u) {
            return invalid("gap requires a feasible control");
        }
        let grad = self.saa_gradient(u)?;
        self.gap_from_gradient(u, &grad)
    }
}
