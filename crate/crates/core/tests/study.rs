use saa_core::pde_models::{ControlField, PdeKind};
use saa_core::study::*;

fn tiny(kind: PdeKind) -> StudyConfig {
    let mut cfg = StudyConfig::desk(kind);
    cfg.n = 8;
    cfg.field.terms = 10;
    cfg.n_ref = 64;
    cfg.n_grid = vec![2, 4, 8];
    cfg.replications = 3;
    cfg.solver.max_iters = 40;
    cfg
}

#[test]
fn reference_scores_zero_against_itself() {
    let cfg = tiny(PdeKind::AffineLinear);
    let reference = build_reference(&cfg).unwrap();
    let (obj_gap, l1, gap) = score(&reference, &reference.u_ref).unwrap();
    assert_eq!(obj_gap, 0.0);
    assert_eq!(l1, 0.0);
    assert!(gap <= 1e-10);
}

#[test]
fn reference_is_deterministic() {
    let cfg = tiny(PdeKind::Bilinear);
    let a = build_reference(&cfg).unwrap();
    let b = build_reference(&cfg).unwrap();
    assert_eq!(a.u_ref, b.u_ref);
    assert_eq!(a.theta_ref.to_bits(), b.theta_ref.to_bits());
}

#[test]
fn replications_are_reproducible_and_near_optimal() {
    let cfg = tiny(PdeKind::AffineLinear);
    let reference = build_reference(&cfg).unwrap();
    let (u1, m1) = run_replication(&cfg, &reference, 4, 1).unwrap();
    let (u2, m2) = run_replication(&cfg, &reference, 4, 1).unwrap();
    assert_eq!(u1, u2);
    assert_eq!(m1.obj_gap.to_bits(), m2.obj_gap.to_bits());
    assert!(m1.obj_gap >= -1e-9);
    let (u3, _) = run_replication(&cfg, &reference, 4, 2).unwrap();
    assert_ne!(u1, u3);
}

#[test]
fn study_writes_tables_and_report_regenerates_them() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(PdeKind::AffineLinear);
    cfg.output_dir = Some(dir.path().to_path_buf());
    let report = run_study(&cfg).unwrap();
    assert!(report.valid);
    assert_eq!(report.replications.len(), 9);
    assert_eq!(report.summary.len(), 3);
    for r in &report.summary {
        assert!(r.mean_obj_gap >= -1e-9 && r.mean_gap >= -1e-9);
    }
    for f in [
        "raw.csv",
        "summary.csv",
        "rates.csv",
        "saa_values.csv",
        "consistency.csv",
        "rate_obj_gap.svg",
        "rate_l1_dist.svg",
        "rate_ref_gap.svg",
        "reference_control.csv",
        "reference_control.svg",
        "reference_trace.csv",
    ] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    let raw = std::fs::read_to_string(dir.path().join("raw.csv")).unwrap();
    assert_eq!(raw.lines().next(), Some(RAW_HEADER));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().next(), Some(SUMMARY_HEADER));
    let rates = std::fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    assert_eq!(rates.lines().next(), Some(RATES_HEADER));

    std::fs::remove_file(dir.path().join("summary.csv")).unwrap();
    regenerate_report(dir.path()).unwrap();
    assert_eq!(std::fs::read_to_string(dir.path().join("summary.csv")).unwrap(), summary);
}

#[test]
fn regenerate_rejects_non_study_directory() {
    let dir = tempfile::tempdir().unwrap();
    assert!(regenerate_report(dir.path()).is_err());
}

#[test]
fn heatmap_has_one_polygon_per_cell() {
    let mesh = saa_core::mesh_fem::Mesh::new(4).unwrap();
    let u = ControlField::new((0..32).map(|c| (c as f64 / 16.0) - 1.0).collect());
    let svg = control_heatmap_svg(&mesh, &u, -1.0, 1.0, "test");
    assert_eq!(svg.matches("<polygon").count(), 32);
}
