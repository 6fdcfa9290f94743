use std::f64::consts::PI;

use proptest::prelude::*;
use saa_core::mesh_fem::{
    assemble_mass_p1, assemble_stiffness, l2_error, solve_spd, Mesh,
};

/// Solves -Δy = 2π² sin(πx)sin(πy) with the load computed from the
/// interpolated right-hand side and returns the L2 error against the exact
/// solution.
fn manufactured_error(n: usize) -> f64 {
    let mesh = Mesh::new(n).unwrap();
    let a = assemble_stiffness(&mesh, &vec![1.0; mesh.num_cells()]).unwrap();
    let mass = assemble_mass_p1(&mesh);
    let f = mesh.interpolate(|x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin());
    let load = mesh.restrict_interior(&mass.apply(&f));
    let y = solve_spd(&a, &load).unwrap();
    let r: Vec<f64> = a
        .apply(&y)
        .iter()
        .zip(&load)
        .map(|(p, q)| p - q)
        .collect();
    let rel = r.iter().map(|v| v * v).sum::<f64>().sqrt()
        / load.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(rel <= 1e-12, "residual {rel}");
    let full = mesh.expand_interior(&y);
    l2_error(&mesh, &full, |x, y| (PI * x).sin() * (PI * y).sin())
}

fn compensated_sum(v: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for &x in v {
        let t = s + x;
        c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        s = t;
    }
    s + c
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    let errors: Vec<f64> = [8, 16, 32, 64].iter().map(|&n| manufactured_error(n)).collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.6..=4.4).contains(&ratio), "ratio {ratio}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stiffness_symmetric_for_random_coefficients(
        n in 2usize..10,
        seed in proptest::collection::vec(0.05f64..5.0, 1..20),
    ) {
        let mesh = Mesh::new(n).unwrap();
        let kappa: Vec<f64> = (0..mesh.num_cells()).map(|c| seed[c % seed.len()]).collect();
        let a = assemble_stiffness(&mesh, &kappa).unwrap();
        prop_assert!(a.max_asymmetry() <= 1e-14 * a.max_abs());
        prop_assert!(a.diagonal().iter().all(|&d| d > 0.0));
    }

    #[test]
    fn mass_reproduces_domain_area(n in 1usize..24) {
        let mesh = Mesh::new(n).unwrap();
        let m = assemble_mass_p1(&mesh);
        let total = compensated_sum(&m.apply(&vec![1.0; mesh.num_nodes()]));
        prop_assert!((total - 1.0).abs() <= 1e-14, "err {}", total - 1.0);
    }
}
