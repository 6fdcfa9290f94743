use crate::error::{invalid, Result};

/// Truncation bound of the parameter distribution.
pub const TRUNCATION: f64 = 3.0;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Acklam's rational approximation of the standard normal quantile
/// (relative error about 1.2e-9), refined by one Halley step.
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e / normal_pdf(x);
    x - u / (1.0 + 0.5 * x * u)
}

/// CDF of the standard normal conditioned on `[-3, 3]`.
pub fn truncnorm_cdf(x: f64) -> f64 {
    if x <= -TRUNCATION {
        return 0.0;
    }
    if x >= TRUNCATION {
        return 1.0;
    }
    let lo = normal_cdf(-TRUNCATION);
    (normal_cdf(x) - lo) / (normal_cdf(TRUNCATION) - lo)
}

/// Quantile of the standard normal conditioned on `[-3, 3]`.
///
/// Exactly antisymmetric about `p = 1/2`: the upper half is computed as
/// `-F⁻¹(1 - p)`, where `1 - p` is exact for `p ≥ 1/2`.
pub fn truncnorm_inverse_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return invalid(format!("probability {p} outside (0, 1)"));
    }
    if p > 0.5 {
        return truncnorm_inverse_cdf(1.0 - p).map(|x| -x);
    }
    let lo = normal_cdf(-TRUNCATION);
    let mass = 1.0 - 2.0 * lo;
    let q = lo + p * mass;
    Ok(normal_quantile(q).clamp(-TRUNCATION, TRUNCATION))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_is_zero() {
        assert_eq!(truncnorm_inverse_cdf(0.5).unwrap(), 0.0);
    }

    #[test]
    fn rejects_out_of_range() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(truncnorm_inverse_cdf(p).is_err());
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for k in 1..200 {
            let p = k as f64 / 200.0;
            let x = normal_quantile(p);
            assert!((normal_cdf(x) - p).abs() < 1e-14, "p={p}");
        }
    }

    #[test]
    fn symmetric_and_monotone() {
        let mut prev = -TRUNCATION;
        for k in 1..1000 {
            let p = k as f64 / 1000.0;
            let x = truncnorm_inverse_cdf(p).unwrap();
            let y = truncnorm_inverse_cdf(1.0 - p).unwrap();
            assert!((x + y).abs() <= 1e-10);
            assert!(x >= prev);
            assert!(x.abs() <= TRUNCATION);
            prev = x;
        }
    }

    #[test]
    fn extreme_probabilities_stay_in_box() {
        for p in [1e-300, 1e-17, 1e-9, 1.0 - 1e-16] {
            let x = truncnorm_inverse_cdf(p).unwrap();
            assert!(x.abs() <= TRUNCATION);
        }
    }
}
