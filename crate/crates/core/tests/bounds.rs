use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saa_core::bounds::*;

fn inputs(covering: CoveringModel) -> BoundInputs {
    BoundInputs {
        r_ad: 1.0,
        tau: 1.0,
        lipschitz: 1.0,
        covering,
    }
}

#[test]
fn doubling_eps_quarters_the_estimate() {
    let inp = inputs(CoveringModel::Const(1));
    for eps in [0.01, 0.3, 2.0] {
        let a = sample_size_estimate(&inp, eps).unwrap();
        let b = sample_size_estimate(&inp, 2.0 * eps).unwrap();
        assert!((a / b - 4.0).abs() < 1e-12);
    }
}

#[test]
fn shrinking_eps_never_lowers_the_bound() {
    let inp = inputs("poly:1:1".parse().unwrap());
    let ns: Vec<u64> = [1.0, 0.5, 0.25]
        .iter()
        .map(|&e| sample_size_bound(&inp, e).unwrap())
        .collect();
    // 12 · 1 · ceil(4), 48 · ceil(8), 192 · ceil(16)
    assert_eq!(ns, vec![48, 384, 3072]);
}

#[test]
fn inverse_square_root_rate() {
    let pts: Vec<(f64, f64)> = [4.0, 16.0, 64.0, 256.0].iter().map(|&n: &f64| (n, 3.0 / n.sqrt())).collect();
    assert!((fit_rate(&pts).unwrap().slope + 0.5).abs() < 1e-12);
}

#[test]
fn noisy_inverse_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let pts: Vec<(f64, f64)> = (0..20)
        .map(|k| {
            let n = 2f64.powf(1.0 + 0.4 * k as f64);
            (n, (1.0 + 0.1 * rng.random_range(-1.0..1.0)) / n)
        })
        .collect();
    let fit = fit_rate(&pts).unwrap();
    assert!((-1.15..=-0.85).contains(&fit.slope), "{}", fit.slope);
}

proptest! {
    #[test]
    fn fit_is_scale_equivariant(
        c in 1e-6f64..1e6,
        values in prop::collection::vec(1e-3f64..1e3, 5),
    ) {
        let pts: Vec<(f64, f64)> = values.iter().enumerate().map(|(k, &v)| ((k + 1) as f64 * 3.0, v)).collect();
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(n, v)| (n, c * v)).collect();
        let (a, b) = (fit_rate(&pts).unwrap(), fit_rate(&scaled).unwrap());
        prop_assert!((a.slope - b.slope).abs() <= 1e-12 * a.slope.abs().max(1.0));
        prop_assert!((b.intercept - a.intercept - c.ln()).abs() <= 1e-9);
    }

    #[test]
    fn bound_is_at_least_one(
        r in 1e-3f64..10.0, tau in 1e-3f64..10.0, l in 1e-3f64..10.0, eps in 1e-3f64..1e3,
    ) {
        let inp = BoundInputs { r_ad: r, tau, lipschitz: l, covering: CoveringModel::Poly { c: 1.0, s: 2.0 } };
        prop_assert!(sample_size_bound(&inp, eps).unwrap() >= 1);
    }
}
