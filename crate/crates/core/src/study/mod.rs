//! Reference problem, SAA replications over a grid of sample sizes, and
//! empirical convergence rates.

mod output;
mod svg;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{fit_rate, RateFit};
use crate::composite_saa::CompositeProblem;
use crate::cond_grad::{self, LineSearch, SolveStatus, SolveTrace, SolverConfig};
use crate::error::{invalid, Result, SaaError};
use crate::mesh_fem::Mesh;
use crate::pde_models::{ControlField, PdeKind, ProblemData};
use crate::random_field::{
    default_kl_spec, iid_samples, qmc_samples, KlFieldSpec, SampleSet, DEFAULT_AMPLITUDE,
    DEFAULT_CORRELATION_LENGTH, DEFAULT_KAPPA_FLOOR, DEFAULT_TERMS,
};

pub use output::{
    read_raw_csv, read_saa_values_csv, write_control_csv, write_raw_csv, write_rates_csv,
    write_saa_values_csv, write_summary_csv, write_consistency_csv, RAW_HEADER, RATES_HEADER,
    SUMMARY_HEADER,
};
pub use svg::{control_heatmap_svg, rate_plot_svg};

/// Reference solves run at least this many iterations.
pub const REFERENCE_MIN_ITERS: usize = 500;
/// Fraction of failed replications at one sample size that invalidates a study.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;
/// Soft threshold for the share of reference cells at `{l, 0, u}`.
pub const BANG_BANG_THRESHOLD: f64 = 0.8;

pub const METRICS: [&str; 3] = ["obj_gap", "l1_dist", "ref_gap"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSettings {
    pub terms: usize,
    pub correlation_length: f64,
    pub amplitude: f64,
    pub kappa_floor: f64,
}

impl Default for FieldSettings {
    fn default() -> Self {
        Self {
            terms: DEFAULT_TERMS,
            correlation_length: DEFAULT_CORRELATION_LENGTH,
            amplitude: DEFAULT_AMPLITUDE,
            kappa_floor: DEFAULT_KAPPA_FLOOR,
        }
    }
}

impl FieldSettings {
    pub fn spec(&self) -> Result<KlFieldSpec> {
        default_kl_spec(
            self.terms,
            self.correlation_length,
            self.amplitude,
            self.kappa_floor,
        )
    }
}

/// `β` and control bounds; `None` takes the per-model experiment default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemSettings {
    pub beta: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl ProblemSettings {
    pub fn data(&self, kind: PdeKind, mesh: &Mesh) -> ProblemData {
        let mut d = ProblemData::experiment_default(kind, mesh);
        if let Some(b) = self.beta {
            d.beta = b;
        }
        if let Some(l) = self.lower {
            d.lower = l;
        }
        if let Some(u) = self.upper {
            d.upper = u;
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub kind: PdeKind,
    pub n: usize,
    pub field: FieldSettings,
    pub problem: ProblemSettings,
    pub n_ref: usize,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub solver: SolverConfig,
    pub output_dir: Option<PathBuf>,
}

impl StudyConfig {
    /// Full-scale settings for `kind`: `n = 64`, `N_ref = 8192`, 40 replications.
    pub fn full(kind: PdeKind) -> Self {
        Self {
            kind,
            n: 64,
            field: FieldSettings::default(),
            problem: ProblemSettings::default(),
            n_ref: 8192,
            n_grid: vec![2, 8, 32, 128, 512],
            replications: 40,
            seed: 0,
            solver: SolverConfig::default_for(kind),
            output_dir: None,
        }
    }

    /// Desk-scale settings: `n = 32`, `N_ref = 1024`, `N ∈ {2, 8, 32, 128}`, 10 replications.
    pub fn desk(kind: PdeKind) -> Self {
        Self {
            n: 32,
            n_ref: 1024,
            n_grid: vec![2, 8, 32, 128],
            replications: 10,
            ..Self::full(kind)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return invalid("mesh size must be positive");
        }
        if self.n_grid.is_empty() {
            return invalid("sample-size grid is empty");
        }
        if self.n_grid[0] == 0 || self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("sample-size grid must be positive and strictly increasing");
        }
        if self.replications == 0 {
            return invalid("at least one replication required");
        }
        if self.n_ref <= *self.n_grid.last().unwrap() {
            return invalid("reference sample count must exceed the largest grid size");
        }
        self.solver.validate()?;
        if matches!(self.solver.line_search, LineSearch::Exact) && self.kind != PdeKind::AffineLinear {
            return Err(SaaError::ModelInconsistency(
                "exact line search requires the affine-linear model".into(),
            ));
        }
        let mesh = Mesh::new(self.n)?;
        self.problem.data(self.kind, &mesh).validate(self.kind, &mesh)?;
        self.field.spec()?;
        Ok(())
    }

    pub fn reference_solver(&self) -> SolverConfig {
        SolverConfig {
            gap_tol: 1e-10,
            max_iters: self.solver.max_iters.max(REFERENCE_MIN_ITERS),
            line_search: self.solver.line_search,
        }
    }

    /// Scramble seed of the reference QMC points.
    pub fn reference_seed(&self) -> u64 {
        mix(&[self.seed, u64::MAX])
    }

    /// Seed of the i.i.d. samples of replication `rep` at size `n_samples`.
    pub fn replication_seed(&self, n_samples: usize, rep: usize) -> u64 {
        mix(&[self.seed, n_samples as u64, rep as u64])
    }

    pub fn problem(&self, samples: SampleSet) -> Result<CompositeProblem> {
        let mesh = Mesh::new(self.n)?;
        let data = self.problem.data(self.kind, &mesh);
        CompositeProblem::new(self.kind, data, self.field.spec()?, samples, mesh)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based seed derivation.
fn mix(words: &[u64]) -> u64 {
    words.iter().fold(0, |h, &w| splitmix64(h ^ splitmix64(w)))
}

/// Share of cells within `1e-6` of `{lower, 0, upper}`.
pub fn bang_bang_fraction(u: &ControlField, lower: f64, upper: f64) -> f64 {
    let hits = u
        .values
        .iter()
        .filter(|&&v| [lower, 0.0, upper].iter().any(|t| (v - t).abs() <= 1e-6))
        .count();
    hits as f64 / u.len().max(1) as f64
}

pub struct Reference {
    pub problem: CompositeProblem,
    pub u_ref: ControlField,
    pub theta_ref: f64,
    pub trace: SolveTrace,
}

pub fn build_reference(cfg: &StudyConfig) -> Result<Reference> {
    cfg.validate()?;
    let samples = qmc_samples(cfg.field.terms, cfg.n_ref, cfg.reference_seed())?;
    let problem = cfg.problem(samples)?;
    let u0 = ControlField::zeros(problem.mesh().num_cells());
    let trace = cond_grad::solve(&problem, &u0, &cfg.reference_solver()).map_err(|e| match e {
        SaaError::Stagnation { iteration, trace } => SaaError::StudyAbort(format!(
            "reference solve stagnated at iteration {iteration} with gap {:e}",
            trace.final_gap()
        )),
        other => other,
    })?;
    Ok(Reference {
        u_ref: trace.final_u.clone(),
        theta_ref: trace.final_objective(),
        trace,
        problem,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReplicationStatus {
    GapMet,
    IterCap,
    Failed,
}

impl ReplicationStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ReplicationStatus::GapMet => "gap-met",
            ReplicationStatus::IterCap => "iter-cap",
            ReplicationStatus::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gap-met" => Ok(ReplicationStatus::GapMet),
            "iter-cap" => Ok(ReplicationStatus::IterCap),
            "failed" => Ok(ReplicationStatus::Failed),
            _ => Err(SaaError::Parse(format!("unknown replication status '{s}'"))),
        }
    }

    pub fn is_ok(self) -> bool {
        self != ReplicationStatus::Failed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationMetrics {
    pub n: usize,
    pub rep: usize,
    /// `G_ref(u_N) - ϑ_ref`
    pub obj_gap: f64,
    /// `‖u_N - u_ref‖_{L¹}`
    pub l1_dist: f64,
    /// `Ψ_ref(u_N)`
    pub ref_gap: f64,
    /// Optimal value `ϑ̂_N` of the SAA problem.
    pub saa_value: f64,
    pub status: ReplicationStatus,
    pub error: Option<String>,
}

impl ReplicationMetrics {
    fn failed(n: usize, rep: usize, err: &SaaError) -> Self {
        Self {
            n,
            rep,
            obj_gap: f64::NAN,
            l1_dist: f64::NAN,
            ref_gap: f64::NAN,
            saa_value: f64::NAN,
            status: ReplicationStatus::Failed,
            error: Some(format!("N={n} rep={rep}: {err}")),
        }
    }
}

/// `(G_ref(u) - ϑ_ref, ‖u - u_ref‖_{L¹}, Ψ_ref(u))`.
pub fn score(reference: &Reference, u: &ControlField) -> Result<(f64, f64, f64)> {
    let at_ref = reference.problem.evaluate(u)?;
    let grad = at_ref.gradient.as_ref().expect("gradient requested");
    let ref_gap = reference.problem.gap_from_gradient(u, grad)?.gap;
    Ok((
        at_ref.objective() - reference.theta_ref,
        u.l1_distance(&reference.u_ref, reference.problem.cell_area()),
        ref_gap,
    ))
}

/// Solves one SAA instance and scores it against the reference problem.
pub fn run_replication(
    cfg: &StudyConfig,
    reference: &Reference,
    n_samples: usize,
    rep: usize,
) -> Result<(ControlField, ReplicationMetrics)> {
    let samples = iid_samples(cfg.field.terms, n_samples, cfg.replication_seed(n_samples, rep))?;
    let problem = cfg.problem(samples)?;
    let u0 = ControlField::zeros(problem.mesh().num_cells());
    let trace = cond_grad::solve(&problem, &u0, &cfg.solver)?;
    let u = trace.final_u.clone();
    let (obj_gap, l1_dist, ref_gap) = score(reference, &u)?;
    let metrics = ReplicationMetrics {
        n: n_samples,
        rep,
        obj_gap,
        l1_dist,
        ref_gap,
        saa_value: trace.final_objective(),
        status: match trace.status {
            SolveStatus::GapMet => ReplicationStatus::GapMet,
            SolveStatus::IterCap => ReplicationStatus::IterCap,
        },
        error: None,
    };
    Ok((u, metrics))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryRow {
    pub n: usize,
    pub mean_obj_gap: f64,
    pub se_obj_gap: f64,
    pub mean_l1: f64,
    pub se_l1: f64,
    pub mean_gap: f64,
    pub se_gap: f64,
    pub completed: usize,
    pub failed: usize,
}

impl SummaryRow {
    pub fn metric(&self, name: &str) -> Option<(f64, f64)> {
        match name {
            "obj_gap" => Some((self.mean_obj_gap, self.se_obj_gap)),
            "l1_dist" => Some((self.mean_l1, self.se_l1)),
            "ref_gap" => Some((self.mean_gap, self.se_gap)),
            _ => None,
        }
    }
}

/// Mean and standard error of the mean; the error is 0 for one value.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}

/// Per-size means over completed replications, in increasing `N`.
pub fn summarize(rows: &[ReplicationMetrics]) -> Vec<SummaryRow> {
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|n| {
            let mut group: Vec<&ReplicationMetrics> = rows.iter().filter(|r| r.n == n).collect();
            group.sort_by_key(|r| r.rep);
            let ok: Vec<&&ReplicationMetrics> = group.iter().filter(|r| r.status.is_ok()).collect();
            let col = |f: fn(&ReplicationMetrics) -> f64| mean_se(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (mean_obj_gap, se_obj_gap) = col(|r| r.obj_gap);
            let (mean_l1, se_l1) = col(|r| r.l1_dist);
            let (mean_gap, se_gap) = col(|r| r.ref_gap);
            SummaryRow {
                n,
                mean_obj_gap,
                se_obj_gap,
                mean_l1,
                se_l1,
                mean_gap,
                se_gap,
                completed: ok.len(),
                failed: group.len() - ok.len(),
            }
        })
        .collect()
}

/// Log-log fit of the mean of `metric` over `N`; `None` when fewer than three
/// sizes have a positive mean.
pub fn fit_metric(summary: &[SummaryRow], metric: &str) -> Option<RateFit> {
    let pts: Vec<(f64, f64)> = summary
        .iter()
        .filter_map(|r| r.metric(metric).map(|(m, _)| (r.n as f64, m)))
        .filter(|&(_, m)| m > 0.0 && m.is_finite())
        .collect();
    fit_rate(&pts).ok()
}

/// Mean and standard error of `|ϑ̂_N - ϑ_ref|` per `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyRow {
    pub n: usize,
    pub mean_abs_err: f64,
    pub se_abs_err: f64,
}

pub fn consistency(rows: &[ReplicationMetrics], theta_ref: f64) -> Vec<ConsistencyRow> {
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|n| {
            let errs: Vec<f64> = rows
                .iter()
                .filter(|r| r.n == n && r.status.is_ok())
                .map(|r| (r.saa_value - theta_ref).abs())
                .collect();
            let (mean_abs_err, se_abs_err) = mean_se(&errs);
            ConsistencyRow {
                n,
                mean_abs_err,
                se_abs_err,
            }
        })
        .collect()
}

/// Whether the means are nonincreasing in `N`, allowing at most one increase
/// and only one no larger than the standard error of the larger mean.
pub fn nonincreasing_up_to_one_inversion(rows: &[ConsistencyRow]) -> bool {
    let mut inversions = 0;
    for w in rows.windows(2) {
        let rise = w[1].mean_abs_err - w[0].mean_abs_err;
        if rise > 0.0 {
            inversions += 1;
            if rise > w[1].se_abs_err.max(w[0].se_abs_err) {
                return false;
            }
        }
    }
    inversions <= 1
}

pub struct StudyReport {
    pub kind: PdeKind,
    pub theta_ref: f64,
    pub reference_gap: f64,
    pub reference_iterations: usize,
    pub bang_bang_fraction: f64,
    pub u_ref: ControlField,
    pub replications: Vec<ReplicationMetrics>,
    pub summary: Vec<SummaryRow>,
    pub fits: Vec<(String, Option<RateFit>)>,
    pub consistency: Vec<ConsistencyRow>,
    /// False when more than 20% of the replications at some `N` failed.
    pub valid: bool,
}

impl StudyReport {
    pub fn fit(&self, metric: &str) -> Option<RateFit> {
        self.fits
            .iter()
            .find(|(m, _)| m == metric)
            .and_then(|(_, f)| *f)
    }
}

pub fn fits_for(summary: &[SummaryRow]) -> Vec<(String, Option<RateFit>)> {
    METRICS
        .iter()
        .map(|m| (m.to_string(), fit_metric(summary, m)))
        .collect()
}

pub fn study_is_valid(summary: &[SummaryRow]) -> bool {
    summary.iter().all(|r| {
        let total = r.completed + r.failed;
        total > 0 && (r.failed as f64) <= MAX_FAILURE_FRACTION * total as f64
    })
}

/// Builds the reference, runs every `(N, rep)` pair, and, when
/// `output_dir` is set, persists tables and plots there.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    let reference = build_reference(cfg)?;
    run_study_with_reference(cfg, &reference)
}

pub fn run_study_with_reference(cfg: &StudyConfig, reference: &Reference) -> Result<StudyReport> {
    cfg.validate()?;
    let tasks: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.replications).map(move |r| (n, r)))
        .collect();
    let replications: Vec<ReplicationMetrics> = tasks
        .par_iter()
        .map(|&(n, rep)| match run_replication(cfg, reference, n, rep) {
            Ok((_, m)) => m,
            Err(e) => ReplicationMetrics::failed(n, rep, &e),
        })
        .collect();
    let summary = summarize(&replications);
    let data = reference.problem.data();
    let report = StudyReport {
        kind: cfg.kind,
        theta_ref: reference.theta_ref,
        reference_gap: reference.trace.final_gap(),
        reference_iterations: reference.trace.iterations(),
        bang_bang_fraction: bang_bang_fraction(&reference.u_ref, data.lower, data.upper),
        u_ref: reference.u_ref.clone(),
        fits: fits_for(&summary),
        consistency: consistency(&replications, reference.theta_ref),
        valid: study_is_valid(&summary),
        summary,
        replications,
    };
    if let Some(dir) = &cfg.output_dir {
        output::write_study(dir, &report, reference)?;
    }
    Ok(report)
}

/// Recomputes summary, rates, and plots from the raw tables in `dir`.
pub fn regenerate_report(dir: &std::path::Path) -> Result<Vec<SummaryRow>> {
    output::regenerate(dir)
}

/// The nominal problem: a single sample at the mean parameter.
pub fn nominal_problem(cfg: &StudyConfig) -> Result<CompositeProblem> {
    cfg.problem(SampleSet::nominal(cfg.field.terms))
}
