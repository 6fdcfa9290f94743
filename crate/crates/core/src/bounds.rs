//! Sample-size estimate and log-log rate fitting.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{invalid, Result, SaaError};

/// Covering-number model `ν ↦ 𝒩(ν)` of the image of the feasible set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoveringModel {
    /// `𝒩 ≡ c`.
    Const(u64),
    /// `𝒩(ν) = max(1, ceil(c ν^{-s}))`.
    Poly { c: f64, s: f64 },
}

impl CoveringModel {
    pub fn eval(&self, nu: f64) -> f64 {
        match *self {
            CoveringModel::Const(c) => c as f64,
            CoveringModel::Poly { c, s } => (c * nu.powf(-s)).ceil().max(1.0),
        }
    }
}

impl fmt::Display for CoveringModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoveringModel::Const(c) => write!(f, "const:{c}"),
            CoveringModel::Poly { c, s } => write!(f, "poly:{c}:{s}"),
        }
    }
}

impl FromStr for CoveringModel {
    type Err = SaaError;

    /// `const:<c>` or `poly:<c>:<s>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| SaaError::Parse(format!("covering model '{s}': {why}"));
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["const", c] => {
                let c: u64 = c.parse().map_err(|_| bad("expected a positive integer"))?;
                if c == 0 {
                    return Err(bad("covering number must be at least 1"));
                }
                Ok(CoveringModel::Const(c))
            }
            ["poly", c, e] => {
                let c: f64 = c.parse().map_err(|_| bad("bad constant"))?;
                let e: f64 = e.parse().map_err(|_| bad("bad exponent"))?;
                if !(c > 0.0 && c.is_finite()) || !(e >= 0.0 && e.is_finite()) {
                    return Err(bad("need c > 0 and s >= 0"));
                }
                Ok(CoveringModel::Poly { c, s: e })
            }
            _ => Err(bad("expected const:<c> or poly:<c>:<s>")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    /// Diameter of the feasible set.
    pub r_ad: f64,
    /// Sub-Gaussian constant of the gradient.
    pub tau: f64,
    /// Lipschitz constant of the gradient.
    pub lipschitz: f64,
    pub covering: CoveringModel,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("r", self.r_ad), ("tau", self.tau), ("L", self.lipschitz)] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{name} must be positive and finite"));
            }
        }
        Ok(())
    }
}

/// Unrounded estimate `12 r² τ² / ε² · 𝒩(ε / (4 r L))`.
pub fn sample_size_estimate(inp: &BoundInputs, eps: f64) -> Result<f64> {
    inp.validate()?;
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid("eps must be positive");
    }
    let nu = eps / (4.0 * inp.r_ad * inp.lipschitz);
    Ok(12.0 * inp.r_ad.powi(2) * inp.tau.powi(2) / (eps * eps) * inp.covering.eval(nu))
}

/// Number of samples that suffices for an `ε`-accurate gap with high probability.
pub fn sample_size_bound(inp: &BoundInputs, eps: f64) -> Result<u64> {
    let est = sample_size_estimate(inp, eps)?;
    if est >= u64::MAX as f64 {
        return Ok(u64::MAX);
    }
    // guard against 12.000000000000002 rounding up
    let rounded = est.round();
    let n = if (est - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded
    } else {
        est.ceil()
    };
    Ok((n as u64).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl RateFit {
    pub fn predict(&self, n: f64) -> f64 {
        (self.intercept + self.slope * n.ln()).exp()
    }
}

/// Least-squares fit of `log(value) = intercept + slope · log(N)`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return invalid("rate fit needs at least 3 points");
    }
    for (i, &(n, v)) in points.iter().enumerate() {
        if !(n > 0.0 && n.is_finite()) {
            return invalid(format!("point {i}: sample size must be positive"));
        }
        if !(v > 0.0 && v.is_finite()) {
            return invalid(format!("point {i}: value {v} is not positive"));
        }
        if points[..i].iter().any(|&(m, _)| m == n) {
            return invalid(format!("point {i}: duplicate sample size {n}"));
        }
    }
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
    })
}
