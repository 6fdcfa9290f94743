use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SaaError};
use crate::mesh_fem::Mesh;

/// Half-width of the reference interval `[-a, a]` that `(0, 1)` is shifted onto.
const HALF_WIDTH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Parity {
    /// `cos(ω t)`, ω solving `1/ℓ - ω tan(ω a) = 0`.
    Even,
    /// `sin(ω t)`, ω solving `tan(ω a)/ℓ + ω = 0`.
    Odd,
}

/// Eigenpair of the 1D exponential covariance `exp(-|s - t| / ℓ)` on `[-a, a]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode1d {
    pub parity: Parity,
    pub omega: f64,
    pub lambda: f64,
    /// L2 normalization, which is also `sup |φ|` on the interval.
    pub scale: f64,
}

impl Mode1d {
    /// Evaluates the normalized eigenfunction at `x ∈ [0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        let t = x - HALF_WIDTH;
        match self.parity {
            Parity::Even => self.scale * (self.omega * t).cos(),
            Parity::Odd => self.scale * (self.omega * t).sin(),
        }
    }

    pub fn sup_abs(&self) -> f64 {
        self.scale
    }
}

/// Tensor-product eigenpair `λ = λ_x λ_y`, `φ(x, y) = φ_x(x) φ_y(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlTerm {
    pub lambda: f64,
    pub x_mode: Mode1d,
    pub y_mode: Mode1d,
    /// 1D mode indices, kept for deterministic ordering of ties.
    pub index: (usize, usize),
}

impl KlTerm {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.x_mode.eval(x) * self.y_mode.eval(y)
    }

    pub fn sup_abs(&self) -> f64 {
        self.x_mode.sup_abs() * self.y_mode.sup_abs()
    }
}

/// Truncated Karhunen-Loève description of the diffusion coefficient
/// `κ(x, ξ) = κ₀ + amplitude Σ_j √λ_j φ_j(x) ξ_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlFieldSpec {
    pub mean: f64,
    pub correlation_length: f64,
    pub amplitude: f64,
    pub kappa_floor: f64,
    pub terms: Vec<KlTerm>,
}

impl KlFieldSpec {
    /// Number of random parameters `M`.
    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    /// `amplitude · 3 · Σ_j √λ_j sup|φ_j|`, the largest possible deviation from the mean.
    pub fn max_fluctuation(&self) -> f64 {
        self.amplitude * 3.0 * self.terms.iter().map(|t| t.lambda.sqrt() * t.sup_abs()).sum::<f64>()
    }

    /// Pointwise evaluation.
    pub fn kappa_at(&self, xi: &[f64], x: f64, y: f64) -> f64 {
        let fluct: f64 = self
            .terms
            .iter()
            .zip(xi)
            .map(|(t, &z)| t.lambda.sqrt() * t.eval(x, y) * z)
            .sum();
        self.mean + self.amplitude * fluct
    }
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return Err(SaaError::EigenSolver(format!(
            "no sign change on [{lo}, {hi}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-12 * mid.max(1.0) {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Err(SaaError::EigenSolver(format!(
        "bisection did not reach tolerance on [{lo}, {hi}]"
    )))
}

/// First `count` 1D eigenpairs in decreasing eigenvalue order.
pub fn modes_1d(count: usize, corr_len: f64) -> Result<Vec<Mode1d>> {
    let a = HALF_WIDTH;
    let pi = std::f64::consts::PI;
    let mut modes = Vec::with_capacity(count);
    let mut k = 1usize;
    while modes.len() < count {
        // even root in ((k-1)π/a, (k-1/2)π/a): ω sin(ωa) - cos(ωa)/ℓ = 0
        let lo = (k as f64 - 1.0) * pi / a;
        let hi = (k as f64 - 0.5) * pi / a;
        let omega = bisect(|w| w * (w * a).sin() - (w * a).cos() / corr_len, lo, hi)?;
        let norm2 = a + (2.0 * omega * a).sin() / (2.0 * omega);
        modes.push(Mode1d {
            parity: Parity::Even,
            omega,
            lambda: 2.0 * corr_len / (1.0 + corr_len * corr_len * omega * omega),
            scale: 1.0 / norm2.sqrt(),
        });
        if modes.len() == count {
            break;
        }
        // odd root in ((k-1/2)π/a, kπ/a): sin(ωa) + ℓ ω cos(ωa) = 0
        let lo = (k as f64 - 0.5) * pi / a;
        let hi = k as f64 * pi / a;
        let omega = bisect(|w| (w * a).sin() + corr_len * w * (w * a).cos(), lo, hi)?;
        let norm2 = a - (2.0 * omega * a).sin() / (2.0 * omega);
        modes.push(Mode1d {
            parity: Parity::Odd,
            omega,
            lambda: 2.0 * corr_len / (1.0 + corr_len * corr_len * omega * omega),
            scale: 1.0 / norm2.sqrt(),
        });
        k += 1;
    }
    Ok(modes)
}

/// Default KL amplitude. With 100 terms the positivity construction puts the
/// mean near 0.76; larger amplitudes push the mean up until the affine-linear
/// experiment's optimal control collapses to zero.
pub const DEFAULT_AMPLITUDE: f64 = 0.03;
pub const DEFAULT_KAPPA_FLOOR: f64 = 0.1;
pub const DEFAULT_CORRELATION_LENGTH: f64 = 1.0;
pub const DEFAULT_TERMS: usize = 100;

/// Separable exponential-covariance KL field on the unit square with `m`
/// terms, with mean chosen so that `κ ≥ kappa_floor` for every `ξ ∈ [-3, 3]^m`.
pub fn default_kl_spec(
    m: usize,
    corr_len: f64,
    amplitude: f64,
    kappa_floor: f64,
) -> Result<KlFieldSpec> {
    if m == 0 {
        return invalid("number of KL terms must be at least 1");
    }
    if !(corr_len > 0.0) {
        return invalid("correlation length must be positive");
    }
    if !(kappa_floor > 0.0) {
        return invalid("kappa floor must be positive");
    }
    if !(amplitude >= 0.0) {
        return invalid("amplitude must be nonnegative");
    }
    let modes = modes_1d(m, corr_len)?;
    let mut terms = Vec::with_capacity(m * m);
    for (i, mx) in modes.iter().enumerate() {
        for (j, my) in modes.iter().enumerate() {
            terms.push(KlTerm {
                lambda: mx.lambda * my.lambda,
                x_mode: *mx,
                y_mode: *my,
                index: (i, j),
            });
        }
    }
    terms.sort_by(|p, q| {
        q.lambda
            .partial_cmp(&p.lambda)
            .unwrap()
            .then(p.index.cmp(&q.index))
    });
    terms.truncate(m);
    let mut spec = KlFieldSpec {
        mean: 0.0,
        correlation_length: corr_len,
        amplitude,
        kappa_floor,
        terms,
    };
    spec.mean = kappa_floor + spec.max_fluctuation();
    Ok(spec)
}

/// KL field pre-evaluated at the cell centroids of a mesh.
#[derive(Debug, Clone)]
pub struct CellField {
    mean: f64,
    floor: f64,
    num_cells: usize,
    /// `amplitude √λ_j φ_j(centroid_c)`, term-major.
    weights: Vec<f64>,
}

impl CellField {
    pub fn new(spec: &KlFieldSpec, mesh: &Mesh) -> Self {
        let centroids: Vec<[f64; 2]> = (0..mesh.num_cells()).map(|c| mesh.centroid(c)).collect();
        let mut weights = Vec::with_capacity(spec.dim() * centroids.len());
        for t in &spec.terms {
            let s = spec.amplitude * t.lambda.sqrt();
            weights.extend(centroids.iter().map(|p| s * t.eval(p[0], p[1])));
        }
        Self {
            mean: spec.mean,
            floor: spec.kappa_floor,
            num_cells: centroids.len(),
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len() / self.num_cells.max(1)
    }

    /// Per-cell fluctuation `κ - κ₀`.
    pub fn fluctuation(&self, xi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_cells];
        for (row, &z) in self.weights.chunks_exact(self.num_cells).zip(xi) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * z;
            }
        }
        out
    }

    pub fn evaluate(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.dim() {
            return invalid(format!(
                "sample has {} entries, field expects {}",
                xi.len(),
                self.dim()
            ));
        }
        let mut kappa = self.fluctuation(xi);
        for (c, k) in kappa.iter_mut().enumerate() {
            *k += self.mean;
            if *k < self.floor * (1.0 - 1e-12) {
                return Err(SaaError::InvariantViolation(format!(
                    "kappa {k} below floor {} on cell {c}",
                    self.floor
                )));
            }
        }
        Ok(kappa)
    }
}

/// Per-cell coefficient at the centroids for one parameter draw.
pub fn evaluate_kappa(spec: &KlFieldSpec, xi: &[f64], mesh: &Mesh) -> Result<Vec<f64>> {
    CellField::new(spec, mesh).evaluate(xi)
}
