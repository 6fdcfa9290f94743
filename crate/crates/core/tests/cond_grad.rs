use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saa_core::composite_saa::CompositeProblem;
use saa_core::cond_grad::*;
use saa_core::mesh_fem::Mesh;
use saa_core::pde_models::*;
use saa_core::random_field::*;
use saa_core::SaaError;

const M: usize = 10;

fn problem(kind: PdeKind, n: usize, count: usize, beta: Option<f64>) -> CompositeProblem {
    let mesh = Mesh::new(n).unwrap();
    let mut data = ProblemData::experiment_default(kind, &mesh);
    if let Some(b) = beta {
        data.beta = b;
    }
    let spec = default_kl_spec(M, 1.0, DEFAULT_AMPLITUDE, DEFAULT_KAPPA_FLOOR).unwrap();
    CompositeProblem::new(kind, data, spec, iid_samples(M, count, 13).unwrap(), mesh).unwrap()
}

fn zeros(p: &CompositeProblem) -> ControlField {
    ControlField::zeros(p.mesh().num_cells())
}

#[test]
fn critical_start_returns_after_one_gap_evaluation() {
    // with a huge L1 weight the off state is optimal
    let p = problem(PdeKind::AffineLinear, 8, 2, Some(10.0));
    let trace = solve(&p, &zeros(&p), &SolverConfig::default_for(PdeKind::AffineLinear)).unwrap();
    assert_eq!(trace.iterations(), 1);
    assert_eq!(trace.status, SolveStatus::GapMet);
    assert_eq!(trace.final_u, zeros(&p));
}

#[test]
fn both_models_decrease_monotonically_and_stay_feasible() {
    for kind in [PdeKind::AffineLinear, PdeKind::Bilinear] {
        let p = problem(kind, 8, 4, None);
        let cfg = SolverConfig {
            max_iters: 60,
            ..SolverConfig::default_for(kind)
        };
        let trace = solve(&p, &zeros(&p), &cfg).unwrap();
        for w in trace.objectives.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{kind:?}: {} > {}", w[1], w[0]);
        }
        assert!(p.data().contains(&trace.final_u));
        assert!(trace.gaps.iter().all(|&g| g >= -1e-12));
        assert!(trace.final_gap() < trace.gaps[0]);
        // recorded objective agrees with a fresh evaluation
        let fresh = p.saa_objective(&trace.final_u).unwrap();
        assert!((fresh - trace.final_objective()).abs() <= 1e-12 * fresh);
    }
}

#[test]
fn iterates_are_feasible_from_a_random_start() {
    let p = problem(PdeKind::Bilinear, 6, 3, Some(1e-4));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let u0 = ControlField::new((0..p.mesh().num_cells()).map(|_| rng.random_range(0.0..=1.0)).collect());
    let mut cfg = SolverConfig::default_for(PdeKind::Bilinear);
    for iters in 1..8 {
        cfg.max_iters = iters;
        let trace = solve(&p, &u0, &cfg).unwrap();
        assert!(p.data().contains(&trace.final_u));
    }
}

#[test]
fn exact_step_is_zero_along_a_null_direction() {
    let p = problem(PdeKind::AffineLinear, 6, 2, None);
    let u = ControlField::constant(p.mesh().num_cells(), 0.3);
    assert_eq!(exact_linesearch_quadratic(&p, &u, &u).unwrap(), 0.0);
}

#[test]
fn exact_step_matches_dense_scan_of_the_true_objective() {
    let p = problem(PdeKind::AffineLinear, 6, 3, None);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..3 {
        let cells = p.mesh().num_cells();
        let u = ControlField::new((0..cells).map(|_| rng.random_range(-1.0..1.0)).collect());
        let v = ControlField::new((0..cells).map(|_| rng.random_range(-1.0..1.0)).collect());
        let s = exact_linesearch_quadratic(&p, &u, &v).unwrap();
        let g = |t: f64| p.saa_objective(&u.lerp(&v, t)).unwrap();
        let best = (0..=2000).map(|k| g(k as f64 / 2000.0)).fold(f64::INFINITY, f64::min);
        assert!(g(s) <= best + 1e-12);
    }
}

#[test]
fn exact_search_requires_the_affine_model() {
    let p = problem(PdeKind::Bilinear, 4, 1, None);
    let cfg = SolverConfig {
        line_search: LineSearch::Exact,
        ..SolverConfig::default_for(PdeKind::Bilinear)
    };
    assert!(matches!(solve(&p, &zeros(&p), &cfg), Err(SaaError::ModelInconsistency(_))));
    let u = zeros(&p);
    assert!(exact_linesearch_quadratic(&p, &u, &u).is_err());
}

#[test]
fn infeasible_start_is_rejected() {
    let p = problem(PdeKind::AffineLinear, 4, 1, None);
    let u0 = ControlField::constant(p.mesh().num_cells(), 2.0);
    assert!(matches!(
        solve(&p, &u0, &SolverConfig::default_for(PdeKind::AffineLinear)),
        Err(SaaError::InvalidArgument(_))
    ));
}

#[test]
fn armijo_also_works_on_the_convex_model() {
    let p = problem(PdeKind::AffineLinear, 8, 3, None);
    let cfg = SolverConfig {
        line_search: LineSearch::ARMIJO_DEFAULT,
        max_iters: 30,
        ..SolverConfig::default_for(PdeKind::AffineLinear)
    };
    let trace = solve(&p, &zeros(&p), &cfg).unwrap();
    assert!(trace.objectives.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn identical_inputs_give_identical_traces() {
    let p = problem(PdeKind::Bilinear, 8, 3, None);
    let cfg = SolverConfig {
        max_iters: 20,
        ..SolverConfig::default_for(PdeKind::Bilinear)
    };
    let a = solve(&p, &zeros(&p), &cfg).unwrap();
    let b = solve(&p, &zeros(&p), &cfg).unwrap();
    assert_eq!(a.objectives, b.objectives);
    assert_eq!(a.gaps, b.gaps);
    assert_eq!(a.final_u, b.final_u);
}

#[test]
fn trace_csv_layout() {
    let p = problem(PdeKind::AffineLinear, 4, 1, None);
    let trace = solve(&p, &zeros(&p), &SolverConfig::default_for(PdeKind::AffineLinear)).unwrap();
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iteration,objective,gap"));
    assert_eq!(lines.count(), trace.iterations());
}
