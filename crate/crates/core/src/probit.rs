//! Numerically stable probit log-likelihood and its first three derivatives.
//!
//! These scalar kernels feed both the tempered-target gradient and the metric
//! tensor. Everything funnels through two primitives: `log_ndtr` (log of the
//! standard normal CDF) and `ratio_log` (log of the Gaussian-to-CDF ratio).
//! For z < 0 both run through erfcx, so they stay accurate deep into the
//! tail; the derivative additionally switches to an asymptotic series below
//! z = -15, mirroring how the gradient is defined.

use ndarray::{Array1, ArrayView1};


use crate::erf::{erfc, erfcx};
use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_74; // 0.5 * ln(2 pi)
const LN_2: f64 = std::f64::consts::LN_2;
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Gradient switches to the tail series at and below this point.
const ASYMPTOTIC_THRESHOLD: f64 = -15.0;

/// Standard normal CDF.
pub fn ndtr(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// log Phi(z), stable over the whole double range.
///
/// For z >= 0 this is `ln(1 - erfc(z/sqrt 2)/2)`; for z < 0 the erfcx route
/// avoids the catastrophic cancellation in `-z^2/2 - log Phi(z)` style
/// expressions.
pub fn log_ndtr(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z >= 0.0 {
        (-0.5 * erfc(z * FRAC_1_SQRT_2)).ln_1p()
    } else {
        -0.5 * z * z + erfcx(-z * FRAC_1_SQRT_2).ln() - LN_2
    }
}

/// r(z) = log( N(z; 0, 1) / Phi(z) ).
///
/// Equal to `-z^2/2 - ln sqrt(2 pi) - log Phi(z)`; for z < 0 the quadratic
/// terms cancel analytically against `log Phi`, which is what makes `exp(r)`
/// accurate for arbitrarily negative z.
pub fn ratio_log(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z >= 0.0 {
        -0.5 * z * z - LN_SQRT_2PI - log_ndtr(z)
    } else {
        LN_2 - LN_SQRT_2PI - erfcx(-z * FRAC_1_SQRT_2).ln()
    }
}

/// Tail series for N(z)/Phi(z) at very negative z.
fn ratio_asymptotic(z: f64) -> f64 {
    -z - 1.0 / z + 2.0 / (z * z * z)
}

/// Probit log-likelihood value and derivative stack at one latent vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbitDerivs {
    /// `sum_n log Phi(y_n x_n)`.
    pub loglik: f64,
    /// First derivative per site, before tempering: `y_n N(z_n)/Phi(z_n)`.
    pub grad: Array1<f64>,
    /// Tempered negative second derivative, `beta (z e + e^2)`; nonnegative.
    pub lambda: Array1<f64>,
    /// Tempered third-derivative term, `beta (y (1-x^2) e - 3 x e^2 - 2 y e^3)`.
    pub dg: Array1<f64>,
}

fn check_labels(y: ArrayView1<'_, f64>) -> Result<()> {
    for (n, &v) in y.iter().enumerate() {
        if v != 1.0 && v != -1.0 {
            return Err(Error::invalid(format!(
                "label at index {n} must be -1 or +1, got {v}"
            )));
        }
    }
    Ok(())
}

/// Log-likelihood, gradient, and the second/third-derivative vectors used by
/// the metric tensor, with the second and third pieces scaled by `beta`.
pub fn derivs(
    x: ArrayView1<'_, f64>,
    y: ArrayView1<'_, f64>,
    beta: f64,
) -> Result<ProbitDerivs> {
    if x.len() != y.len() {
        return Err(Error::dims(format!(
            "x has {} entries but y has {}",
            x.len(),
            y.len()
        )));
    }
    check_labels(y)?;
    let n = x.len();
    let mut loglik = 0.0;
    let mut grad = Array1::zeros(n);
    let mut lambda = Array1::zeros(n);
    let mut dg = Array1::zeros(n);
    for i in 0..n {
        let xi = x[i];
        let yi = y[i];
        let z = yi * xi;
        loglik += log_ndtr(z);
        let e = ratio_log(z).exp();
        let e2 = e * e;
        let e3 = e2 * e;
        grad[i] = yi * if z > ASYMPTOTIC_THRESHOLD {
            e
        } else {
            ratio_asymptotic(z)
        };
        lambda[i] = beta * (z * e + e2);
        dg[i] = beta * (yi * (1.0 - xi * xi) * e - 3.0 * xi * e2 - 2.0 * yi * e3);
    }
    Ok(ProbitDerivs {
        loglik,
        grad,
        lambda,
        dg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr1;
    use std::f64::consts::PI;

    // 60-digit reference values.
    const LOG_NDTR_TABLE: &[(f64, f64)] = &[
        (-40.0, -804.6084420137537882),
        (-20.0, -203.91715537109726394),
        (-15.0, -116.13138484571169524),
        (-10.0, -53.231285150512470578),
        (-5.0, -15.064998393988725736),
        (-2.0, -3.7831843336820319488),
        (-1.0, -1.8410216450092635058),
        (-0.5, -1.1759117615936186089),
        (0.0, -0.6931471805599453094),
        (0.5, -0.3689464152886563931),
        (1.0, -0.1727537790234498895),
        (2.0, -0.0230129093289634885),
        (5.0, -2.866516129637635934e-7),
    ];

    #[test]
    fn log_ndtr_matches_reference() {
        for &(z, want) in LOG_NDTR_TABLE {
            let got = log_ndtr(z);
            assert!(
                (got - want).abs() < 1e-12 + 1e-13 * want.abs(),
                "log_ndtr({z}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn log_ndtr_is_monotone_and_bounded() {
        let mut prev = f64::NEG_INFINITY;
        let mut z = -40.0;
        while z <= 40.0 {
            let v = log_ndtr(z);
            assert!(v.is_finite() || v == 0.0, "z={z}");
            assert!(v <= 0.0, "z={z}");
            assert!(v >= prev, "not monotone at z={z}");
            prev = v;
            z += 0.37;
        }
        // Phi(40) is 1 to double precision.
        assert!(log_ndtr(40.0).abs() < 1e-300);
    }

    #[test]
    fn ratio_log_closed_forms() {
        // z = 0: N(0)/Phi(0) = 2/sqrt(2 pi).
        let want = (2.0 / (2.0 * PI).sqrt()).ln();
        assert!((ratio_log(0.0) - want).abs() < 1e-15);
        assert!((ratio_log(0.0).exp() - 0.7978845608028654).abs() < 1e-15);
        // Far right: log Phi vanishes, r = -z^2/2 - ln sqrt(2 pi).
        let z = 40.0;
        assert!((ratio_log(z) - (-0.5 * z * z - LN_SQRT_2PI)).abs() < 1e-9);
    }

    #[test]
    fn ratio_log_deep_tail_reference() {
        let cases = [
            (-15.0, 15.066086827167822),
            (-8.0, 8.1213681122361127),
            (-40.0, 40.024968847207264),
        ];
        for (z, want) in cases {
            let got = ratio_log(z).exp();
            assert!(
                ((got - want) / want).abs() < 1e-13,
                "exp(r({z})) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn ratio_matches_asymptotic_series_in_tail() {
        for z in [-15.0, -18.0, -20.0, -30.0, -40.0] {
            let exact = ratio_log(z).exp();
            let series = ratio_asymptotic(z);
            assert!(
                ((exact - series) / exact).abs() < 1e-6,
                "series mismatch at z={z}"
            );
        }
    }

    #[test]
    fn gradient_branches_join_continuously() {
        let z = ASYMPTOTIC_THRESHOLD;
        let normal = ratio_log(z).exp();
        let series = ratio_asymptotic(z);
        assert!(((normal - series) / normal).abs() < 1e-6);
    }

    #[test]
    fn derivs_closed_forms_at_zero() {
        let d = derivs(arr1(&[0.0]).view(), arr1(&[1.0]).view(), 1.0).unwrap();
        assert!((d.loglik - (-(2.0f64.ln()))).abs() < 1e-15);
        assert!((d.grad[0] - 0.7978845608028654).abs() < 1e-15);
        assert!((d.lambda[0] - 2.0 / PI).abs() < 1e-15);
        assert!((d.dg[0] - (-0.21801361414499016)).abs() < 1e-14);
    }

    #[test]
    fn derivs_nontrivial_reference_point() {
        let d = derivs(arr1(&[1.3]).view(), arr1(&[-1.0]).view(), 0.7).unwrap();
        assert!((d.loglik - (-2.3351032786624424)).abs() < 1e-13);
        assert!((d.grad[0] - (-1.7703278323596511)).abs() < 1e-13);
        assert!((d.lambda[0] - 0.5828441163717721).abs() < 1e-13);
        assert!((d.dg[0] - 0.06672348834497155).abs() < 1e-13);
    }

    #[test]
    fn beta_zero_keeps_loglik_and_grad() {
        let x = arr1(&[0.3, -2.0, 5.0]);
        let y = arr1(&[1.0, -1.0, 1.0]);
        let d0 = derivs(x.view(), y.view(), 0.0).unwrap();
        let d1 = derivs(x.view(), y.view(), 1.0).unwrap();
        assert_eq!(d0.loglik, d1.loglik);
        assert_eq!(d0.grad, d1.grad);
        assert!(d0.lambda.iter().all(|&v| v == 0.0));
        assert!(d0.dg.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_labels() {
        let r = derivs(arr1(&[0.0]).view(), arr1(&[0.5]).view(), 1.0);
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(11, 0);
        for _ in 0..100 {
            let n = rng.random_range(1..6);
            let x = Array1::from_shape_fn(n, |_| rng.random::<f64>() * 40.0 - 20.0);
            let y = Array1::from_shape_fn(n, |_| if rng.random::<bool>() { 1.0 } else { -1.0 });
            let d = derivs(x.view(), y.view(), 1.0).unwrap();
            let scale = d.grad.iter().map(|v| v.abs()).fold(1e-8, f64::max);
            for i in 0..n {
                let h = 1e-5 * x[i].abs().max(1.0);
                let mut xp = x.clone();
                xp[i] += h;
                let mut xm = x.clone();
                xm[i] -= h;
                let fd = (derivs(xp.view(), y.view(), 1.0).unwrap().loglik
                    - derivs(xm.view(), y.view(), 1.0).unwrap().loglik)
                    / (2.0 * h);
                assert!(
                    ((d.grad[i] - fd) / scale).abs() < 1e-6,
                    "grad fd mismatch at x={} y={}: {} vs {}",
                    x[i],
                    y[i],
                    d.grad[i],
                    fd
                );
            }
        }
    }

    #[test]
    fn lambda_matches_gradient_finite_differences() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(12, 0);
        let beta = 0.6;
        for _ in 0..100 {
            let x = Array1::from_shape_fn(1, |_| rng.random::<f64>() * 20.0 - 10.0);
            let y = arr1(&[if rng.random::<bool>() { 1.0 } else { -1.0 }]);
            let d = derivs(x.view(), y.view(), beta).unwrap();
            let h = 1e-5 * x[0].abs().max(1.0);
            let mut xp = x.clone();
            xp[0] += h;
            let mut xm = x.clone();
            xm[0] -= h;
            // lambda/beta is the negative second derivative of log Phi(yx),
            // i.e. -(d/dx) grad.
            let gp = derivs(xp.view(), y.view(), beta).unwrap().grad[0];
            let gm = derivs(xm.view(), y.view(), beta).unwrap().grad[0];
            let fd = -(gp - gm) / (2.0 * h);
            let lam = d.lambda[0] / beta;
            assert!(
                ((lam - fd) / lam.abs().max(1e-8)).abs() < 1e-5,
                "lambda fd mismatch at x={} y={}: {lam} vs {fd}",
                x[0],
                y[0]
            );
        }
    }

    #[test]
    fn dg_matches_lambda_finite_differences() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(13, 0);
        let beta = 0.85;
        for _ in 0..100 {
            let x = Array1::from_shape_fn(1, |_| rng.random::<f64>() * 16.0 - 8.0);
            let y = arr1(&[if rng.random::<bool>() { 1.0 } else { -1.0 }]);
            let d = derivs(x.view(), y.view(), beta).unwrap();
            let h = 1e-5 * x[0].abs().max(1.0);
            let mut xp = x.clone();
            xp[0] += h;
            let mut xm = x.clone();
            xm[0] -= h;
            let lp = derivs(xp.view(), y.view(), beta).unwrap().lambda[0];
            let lm = derivs(xm.view(), y.view(), beta).unwrap().lambda[0];
            let fd = (lp - lm) / (2.0 * h) / beta;
            let got = d.dg[0] / beta;
            assert!(
                ((got - fd) / got.abs().max(1e-6)).abs() < 1e-4,
                "dg fd mismatch at x={} y={}: {got} vs {fd}",
                x[0],
                y[0]
            );
        }
    }

    #[test]
    fn lambda_is_nonnegative() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(14, 0);
        for _ in 0..500 {
            let x = Array1::from_shape_fn(4, |_| rng.random::<f64>() * 40.0 - 20.0);
            let y = Array1::from_shape_fn(4, |_| if rng.random::<bool>() { 1.0 } else { -1.0 });
            let d = derivs(x.view(), y.view(), rng.random::<f64>()).unwrap();
            assert!(d.lambda.iter().all(|&v| v >= 0.0));
            assert!(d.lambda.iter().all(|&v| v.is_finite()));
        }
    }
}
