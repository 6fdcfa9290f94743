//! Conditional-gradient (Frank-Wolfe) solver for the composite SAA problem,
//! stopped by the gap functional.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::composite_saa::CompositeProblem;
use crate::error::{invalid, Result, SaaError};
use crate::pde_models::{ControlField, PdeKind};

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const GRID_POINTS: usize = 33;
const MAX_HALVINGS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineSearch {
    /// Exact minimization along the segment; affine-linear model only.
    Exact,
    /// Backtracking on `Ĝ_N(u + s d) ≤ Ĝ_N(u) - c s Ψ̂_N(u)`.
    Armijo { c: f64, shrink: f64, s0: f64 },
}

impl LineSearch {
    pub const ARMIJO_DEFAULT: LineSearch = LineSearch::Armijo {
        c: 1e-4,
        shrink: 0.5,
        s0: 1.0,
    };

    pub fn default_for(kind: PdeKind) -> Self {
        match kind {
            PdeKind::AffineLinear => LineSearch::Exact,
            PdeKind::Bilinear => Self::ARMIJO_DEFAULT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub gap_tol: f64,
    pub max_iters: usize,
    pub line_search: LineSearch,
}

impl SolverConfig {
    /// Gap tolerance `1e-10`, at most 100 iterations.
    pub fn default_for(kind: PdeKind) -> Self {
        Self {
            gap_tol: 1e-10,
            max_iters: 100,
            line_search: LineSearch::default_for(kind),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gap_tol > 0.0) {
            return invalid("gap tolerance must be positive");
        }
        if self.max_iters == 0 {
            return invalid("at least one iteration required");
        }
        if let LineSearch::Armijo { c, shrink, s0 } = self.line_search {
            if !(c > 0.0 && c < 1.0 && shrink > 0.0 && shrink < 1.0 && s0 > 0.0 && s0 <= 1.0) {
                return invalid("Armijo parameters need 0<c<1, 0<shrink<1, 0<s0<=1");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    GapMet,
    IterCap,
}

#[derive(Debug, Clone)]
pub struct SolveTrace {
    /// `Ĝ_N(u_k)` for every iterate at which the gap was evaluated.
    pub objectives: Vec<f64>,
    pub gaps: Vec<f64>,
    /// Accepted step sizes; one fewer than `gaps` unless the run stagnated.
    pub steps: Vec<f64>,
    pub final_u: ControlField,
    pub status: SolveStatus,
}

impl SolveTrace {
    pub fn iterations(&self) -> usize {
        self.gaps.len()
    }

    pub fn final_gap(&self) -> f64 {
        *self.gaps.last().expect("at least one gap evaluation")
    }

    pub fn final_objective(&self) -> f64 {
        *self.objectives.last().expect("at least one objective evaluation")
    }

    pub fn min_gap(&self) -> f64 {
        self.gaps.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `iteration,objective,gap` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iteration,objective,gap")?;
        for (k, (o, g)) in self.objectives.iter().zip(&self.gaps).enumerate() {
            writeln!(w, "{k},{o:e},{g:e}")?;
        }
        Ok(())
    }
}

/// Minimizes `a s²/2 + b s + φ(s)` over `[0, 1]` for convex `φ` by a grid
/// scan followed by golden-section refinement to `1e-12` interval width.
pub fn minimize_convex_step<F: Fn(f64) -> f64>(a: f64, b: f64, phi: F) -> Result<f64> {
    if a < -1e-12 {
        return Err(SaaError::ModelInconsistency(format!(
            "negative curvature {a} along the search segment"
        )));
    }
    let total = |s: f64| 0.5 * a * s * s + b * s + phi(s);
    let h = 1.0 / (GRID_POINTS - 1) as f64;
    let values: Vec<f64> = (0..GRID_POINTS).map(|k| total(k as f64 * h)).collect();
    let kbest = values
        .iter()
        .enumerate()
        .fold(0, |best, (k, &v)| if v < values[best] { k } else { best });
    let mut lo = kbest.saturating_sub(1) as f64 * h;
    let mut hi = ((kbest + 1).min(GRID_POINTS - 1)) as f64 * h;
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let (mut f1, mut f2) = (total(x1), total(x2));
    while hi - lo > 1e-12 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = total(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = total(x2);
        }
    }
    let refined = 0.5 * (lo + hi);
    let mut best = (0.0, values[0]);
    for (s, v) in [(kbest as f64 * h, values[kbest]), (refined, total(refined))] {
        if v < best.1 {
            best = (s, v);
        }
    }
    Ok(best.0)
}

/// `ψ` restricted to the segment `u + s (v - u)`: piecewise linear in `s`.
struct SegmentPsi {
    beta_area: f64,
    /// `(u_c, d_c)` per cell
    pairs: Vec<(f64, f64)>,
}

impl SegmentPsi {
    fn new(problem: &CompositeProblem, u: &ControlField, v: &ControlField) -> Self {
        Self {
            beta_area: problem.data().beta * problem.cell_area(),
            pairs: u
                .values
                .iter()
                .zip(&v.values)
                .map(|(&a, &b)| (a, b - a))
                .collect(),
        }
    }

    fn eval(&self, s: f64) -> f64 {
        self.beta_area * self.pairs.iter().map(|(a, d)| (a + s * d).abs()).sum::<f64>()
    }

    /// Minimizes `a s²/2 + b s + ψ(s)` on `[0, 1]`: the analytic minimizer of
    /// each linear piece of `ψ` is a candidate, alongside the grid and
    /// golden-section result of [`minimize_convex_step`].
    fn minimize(&self, a: f64, b: f64) -> Result<f64> {
        let generic = minimize_convex_step(a, b, |s| self.eval(s))?;
        let total = |s: f64| 0.5 * a * s * s + b * s + self.eval(s);

        let mut kinks: Vec<(f64, f64)> = Vec::new();
        let mut slope = 0.0;
        for &(u, d) in &self.pairs {
            if d == 0.0 {
                continue;
            }
            let sign = if u != 0.0 { u.signum() } else { d.signum() };
            slope += sign * d;
            let t = -u / d;
            if t > 0.0 && t < 1.0 {
                kinks.push((t, 2.0 * d.abs()));
            }
        }
        kinks.sort_by(|x, y| x.0.total_cmp(&y.0));

        let mut candidates = vec![0.0, 1.0, generic];
        let mut lo = 0.0;
        let piece = |lo: f64, hi: f64, slope: f64, out: &mut Vec<f64>| {
            if a > 0.0 {
                out.push((-(b + self.beta_area * slope) / a).clamp(lo, hi));
            }
            out.push(hi);
        };
        for &(t, jump) in &kinks {
            piece(lo, t, slope, &mut candidates);
            slope += jump;
            lo = t;
        }
        piece(lo, 1.0, slope, &mut candidates);

        let mut best = (0.0, total(0.0));
        for s in candidates {
            let v = total(s);
            if v < best.1 {
                best = (s, v);
            }
        }
        Ok(best.0)
    }
}

fn quadratic_coefficients(
    problem: &CompositeProblem,
    states_u: &[Vec<f64>],
    states_v: &[Vec<f64>],
) -> (f64, f64) {
    let mass = problem.model().mass();
    let y_d = &problem.data().y_d;
    let (mut a, mut b) = (0.0, 0.0);
    for (yu, yv) in states_u.iter().zip(states_v) {
        let delta: Vec<f64> = yv.iter().zip(yu).map(|(p, q)| p - q).collect();
        let e: Vec<f64> = yu.iter().zip(y_d).map(|(p, q)| p - q).collect();
        let md = mass.apply(&delta);
        a += delta.iter().zip(&md).map(|(p, q)| p * q).sum::<f64>();
        b += e.iter().zip(&md).map(|(p, q)| p * q).sum::<f64>();
    }
    let n = states_u.len() as f64;
    (a / n, b / n)
}

/// Exact step along `u + s (v - u)`, `s ∈ [0, 1]`, for the affine-linear model.
pub fn exact_linesearch_quadratic(
    problem: &CompositeProblem,
    u: &ControlField,
    v: &ControlField,
) -> Result<f64> {
    if problem.kind() != PdeKind::AffineLinear {
        return Err(SaaError::ModelInconsistency(
            "exact line search requires the affine-linear model".into(),
        ));
    }
    if u.values == v.values {
        return Ok(0.0);
    }
    let su = problem.evaluate_states(u)?.states;
    let sv = problem.evaluate_states(v)?.states;
    let (a, b) = quadratic_coefficients(problem, &su, &sv);
    SegmentPsi::new(problem, u, v).minimize(a, b)
}

/// Runs the conditional-gradient method from `u0`.
pub fn solve(problem: &CompositeProblem, u0: &ControlField, cfg: &SolverConfig) -> Result<SolveTrace> {
    cfg.validate()?;
    if !problem.is_feasible(u0) {
        return invalid("initial control is infeasible");
    }
    if matches!(cfg.line_search, LineSearch::Exact) && problem.kind() != PdeKind::AffineLinear {
        return Err(SaaError::ModelInconsistency(
            "exact line search requires the affine-linear model".into(),
        ));
    }
    let exact = matches!(cfg.line_search, LineSearch::Exact);

    let mut u = u0.clone();
    let first = if exact {
        problem.evaluate_full(&u)?
    } else {
        problem.evaluate(&u)?
    };
    let mut objective = first.objective();
    let mut grad = first.gradient.expect("gradient requested");
    let mut states = first.states;

    let mut trace = SolveTrace {
        objectives: Vec::with_capacity(cfg.max_iters),
        gaps: Vec::with_capacity(cfg.max_iters),
        steps: Vec::new(),
        final_u: u.clone(),
        status: SolveStatus::IterCap,
    };

    for k in 0..cfg.max_iters {
        let cert = problem.gap_from_gradient(&u, &grad)?;
        trace.objectives.push(objective);
        trace.gaps.push(cert.gap);
        if cert.gap <= cfg.gap_tol {
            trace.status = SolveStatus::GapMet;
            break;
        }
        if k + 1 == cfg.max_iters {
            break;
        }
        let v = cert.minimizer;
        match cfg.line_search {
            LineSearch::Exact => {
                let states_v = problem.evaluate_states(&v)?.states;
                let (a, b) = quadratic_coefficients(problem, &states, &states_v);
                let s = SegmentPsi::new(problem, &u, &v).minimize(a, b)?;
                trace.steps.push(s);
                if s > 0.0 {
                    for (y, yv) in states.iter_mut().zip(&states_v) {
                        y.iter_mut().zip(yv).for_each(|(p, q)| *p += s * (q - *p));
                    }
                    u = u.lerp(&v, s);
                    let (smooth, g) = problem.gradient_from_states(&states)?;
                    objective = smooth + problem.psi(&u);
                    grad = g;
                }
            }
            LineSearch::Armijo { c, shrink, s0 } => {
                let mut s = s0;
                let mut accepted = None;
                for _ in 0..=MAX_HALVINGS {
                    let trial = u.lerp(&v, s);
                    let ev = problem.evaluate(&trial)?;
                    if ev.objective() <= objective - c * s * cert.gap {
                        accepted = Some((trial, ev));
                        break;
                    }
                    s *= shrink;
                }
                let Some((trial, ev)) = accepted else {
                    trace.final_u = u;
                    return Err(SaaError::Stagnation {
                        iteration: k,
                        trace: Box::new(trace),
                    });
                };
                trace.steps.push(s);
                u = trial;
                objective = ev.objective();
                grad = ev.gradient.expect("gradient requested");
            }
        }
    }
    trace.final_u = u;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(pairs: Vec<(f64, f64)>, beta_area: f64) -> SegmentPsi {
        SegmentPsi { beta_area, pairs }
    }

    #[test]
    fn pure_quadratic_step() {
        let psi = flat(vec![(0.2, 0.5)], 0.0);
        assert_eq!(psi.minimize(2.0, -0.7).unwrap(), 0.35);
        assert_eq!(psi.minimize(1.0, -3.0).unwrap(), 1.0);
        assert_eq!(psi.minimize(1.0, 0.5).unwrap(), 0.0);
        // grid plus golden section alone resolves the minimizer to about sqrt(eps)
        let s = minimize_convex_step(2.0, -0.7, |_| 0.0).unwrap();
        assert!((s - 0.35).abs() < 1e-7);
    }

    #[test]
    fn piecewise_candidates_match_dense_scan() {
        let psi = flat(vec![(0.3, -1.0), (-0.5, 0.8), (0.0, 1.0), (0.1, 0.2)], 0.4);
        for (a, b) in [(0.8, -0.9), (0.0, -0.1), (3.0, 0.2), (1e-3, -1.0)] {
            let s = psi.minimize(a, b).unwrap();
            let total = |s: f64| 0.5 * a * s * s + b * s + psi.eval(s);
            let best = (0..=1_000_000)
                .map(|k| total(k as f64 * 1e-6))
                .fold(f64::INFINITY, f64::min);
            assert!(total(s) <= best + 1e-12, "a={a} b={b}");
            assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn negative_curvature_rejected() {
        assert!(matches!(
            minimize_convex_step(-1.0, 0.0, |_| 0.0),
            Err(SaaError::ModelInconsistency(_))
        ));
    }

    #[test]
    fn kinked_step_matches_dense_scan() {
        // quadratic plus |0.3 - s| kink and linear part
        let (a, b) = (0.8, -0.9);
        let phi = |s: f64| 0.2 * (0.3 - s).abs() + 0.05 * (s - 0.7).abs();
        let s = minimize_convex_step(a, b, phi).unwrap();
        let total = |s: f64| 0.5 * a * s * s + b * s + phi(s);
        let best = (0..=1_000_000)
            .map(|k| total(k as f64 * 1e-6))
            .fold(f64::INFINITY, f64::min);
        assert!(total(s) <= best + 1e-9);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::default_for(PdeKind::AffineLinear);
        assert!(cfg.validate().is_ok());
        cfg.gap_tol = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SolverConfig::default_for(PdeKind::Bilinear);
        cfg.max_iters = 0;
        assert!(cfg.validate().is_err());
    }
}
