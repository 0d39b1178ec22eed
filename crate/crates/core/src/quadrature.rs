//! Adaptive quadrature and the small-N Gaussian orthant oracle.
//!
//! The marginal likelihood of the probit model equals the mass the Gaussian
//! `N(0, K + I)` puts on the orthant `{ y_n z_n >= 0 }`. For one to three
//! data points that mass is computable to near machine precision by nesting
//! adaptive Simpson integration over the constrained coordinates, with the
//! innermost coordinate handled analytically through the normal CDF. This is
//! deliberately independent of every sampler in the crate so it can act as
//! their reference.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;
use crate::probit::ndtr;

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance
/// `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

fn gauss_pdf(x: f64, var: f64) -> f64 {
    (-0.5 * x * x / var).exp() / (SQRT_2PI * var.sqrt())
}

/// log of the probability that `z ~ N(0, cov)` lands in the orthant
/// `{ signs[i] * z_i >= 0 }`. Supports `cov` of order one to three.
pub fn orthant_log_prob(cov: &SpdMatrix, signs: &[f64]) -> Result<f64> {
    let n = cov.order();
    if n > 3 {
        return Err(Error::invalid(format!(
            "orthant oracle supports order <= 3, got {n}"
        )));
    }
    if signs.len() != n {
        return Err(Error::dims(format!(
            "{} signs for a matrix of order {n}",
            signs.len()
        )));
    }
    if signs.iter().any(|&s| s != 1.0 && s != -1.0) {
        return Err(Error::invalid("signs must be -1 or +1"));
    }
    // Fold the signs into the covariance: P(sign o z >= 0) for N(0, C) is
    // the positive-orthant mass of D C D with D = diag(signs).
    let mut c = cov.entries().clone();
    for i in 0..n {
        for j in 0..n {
            c[[i, j]] *= signs[i] * signs[j];
        }
    }
    let p = match n {
        1 => positive_orthant_1(&c),
        2 => positive_orthant_2(&c),
        _ => positive_orthant_3(&c),
    };
    Ok(p.ln())
}

fn positive_orthant_1(c: &Array2<f64>) -> f64 {
    let var = c[[0, 0]];
    let hi = 12.0 * var.sqrt();
    adaptive_simpson(&|t| gauss_pdf(t, var), 0.0, hi, 1e-13)
}

fn positive_orthant_2(c: &Array2<f64>) -> f64 {
    let v1 = c[[0, 0]];
    let slope = c[[1, 0]] / v1;
    let cond_var = c[[1, 1]] - c[[1, 0]] * c[[1, 0]] / v1;
    let cond_sd = cond_var.sqrt();
    let hi = 12.0 * v1.sqrt();
    let f = |t: f64| gauss_pdf(t, v1) * ndtr(slope * t / cond_sd);
    adaptive_simpson(&f, 0.0, hi, 1e-12)
}

fn positive_orthant_3(c: &Array2<f64>) -> f64 {
    // Condition z3 on (z1, z2) analytically; integrate the leading 2x2
    // block by nested Simpson.
    let s11 = [[c[[0, 0]], c[[0, 1]]], [c[[1, 0]], c[[1, 1]]]];
    let det = s11[0][0] * s11[1][1] - s11[0][1] * s11[1][0];
    let inv = [
        [s11[1][1] / det, -s11[0][1] / det],
        [-s11[1][0] / det, s11[0][0] / det],
    ];
    let s12 = [c[[0, 2]], c[[1, 2]]];
    // Regression weights of z3 on (z1, z2) and conditional variance.
    let w = [
        inv[0][0] * s12[0] + inv[0][1] * s12[1],
        inv[1][0] * s12[0] + inv[1][1] * s12[1],
    ];
    let cond_var = c[[2, 2]] - (w[0] * s12[0] + w[1] * s12[1]);
    let cond_sd = cond_var.sqrt();
    let density2 = move |t1: f64, t2: f64| {
        let q = inv[0][0] * t1 * t1 + 2.0 * inv[0][1] * t1 * t2 + inv[1][1] * t2 * t2;
        (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
    };
    let hi1 = 12.0 * c[[0, 0]].sqrt();
    let hi2 = 12.0 * c[[1, 1]].sqrt();
    let outer = |t1: f64| {
        let inner = |t2: f64| {
            let mean3 = w[0] * t1 + w[1] * t2;
            density2(t1, t2) * ndtr(mean3 / cond_sd)
        };
        adaptive_simpson(&inner, 0.0, hi2, 1e-13)
    };
    adaptive_simpson(&outer, 0.0, hi1, 1e-11)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use std::f64::consts::PI;

    #[test]
    fn simpson_integrates_polynomial_exactly() {
        let f = |x: f64| 3.0 * x * x;
        let v = adaptive_simpson(&f, 0.0, 2.0, 1e-12);
        assert!((v - 8.0).abs() < 1e-12);
    }

    #[test]
    fn single_constraint_is_half() {
        let c = SpdMatrix::new(arr2(&[[2.7]])).unwrap();
        let lp = orthant_log_prob(&c, &[1.0]).unwrap();
        assert!((lp - 0.5f64.ln()).abs() < 1e-10);
        let lm = orthant_log_prob(&c, &[-1.0]).unwrap();
        assert!((lm - 0.5f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn bivariate_matches_arcsine_form() {
        // P(z1 >= 0, z2 >= 0) = 1/4 + asin(rho)/(2 pi).
        let c = SpdMatrix::new(arr2(&[[2.0, 0.8], [0.8, 2.0]])).unwrap();
        let rho: f64 = 0.4;
        let want = 0.25 + rho.asin() / (2.0 * PI);
        let got = orthant_log_prob(&c, &[1.0, 1.0]).unwrap();
        assert!((got - want.ln()).abs() < 1e-9, "{got} vs {}", want.ln());
        assert!((got - (-1.1536126344758165)).abs() < 1e-9);
        // Mixed signs flip the correlation.
        let want_mixed = 0.25 - rho.asin() / (2.0 * PI);
        let got_mixed = orthant_log_prob(&c, &[1.0, -1.0]).unwrap();
        assert!((got_mixed - want_mixed.ln()).abs() < 1e-9);
        assert!((got_mixed - (-1.6900783915807234)).abs() < 1e-9);
    }

    #[test]
    fn trivariate_matches_arcsine_form() {
        let c = SpdMatrix::new(arr2(&[
            [2.0, 0.8, 0.5],
            [0.8, 2.0, 0.3],
            [0.5, 0.3, 1.5],
        ]))
        .unwrap();
        let r12: f64 = 0.8 / 2.0;
        let r13: f64 = 0.5 / (2.0f64 * 1.5).sqrt();
        let r23: f64 = 0.3 / (2.0f64 * 1.5).sqrt();
        let want = 0.125 + (r12.asin() + r13.asin() + r23.asin()) / (4.0 * PI);
        let got = orthant_log_prob(&c, &[1.0, 1.0, 1.0]).unwrap();
        assert!((got - want.ln()).abs() < 1e-8, "{got} vs {}", want.ln());
    }

    #[test]
    fn trivariate_diagonal_is_eighth() {
        let c = SpdMatrix::new(arr2(&[
            [1.3, 0.0, 0.0],
            [0.0, 0.7, 0.0],
            [0.0, 0.0, 2.2],
        ]))
        .unwrap();
        let got = orthant_log_prob(&c, &[1.0, -1.0, 1.0]).unwrap();
        assert!((got - 3.0 * 0.5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn rejects_large_order_and_bad_signs() {
        let c = SpdMatrix::new(Array2::eye(4)).unwrap();
        assert!(orthant_log_prob(&c, &[1.0; 4]).is_err());
        let c2 = SpdMatrix::new(Array2::eye(2)).unwrap();
        assert!(orthant_log_prob(&c2, &[1.0, 0.0]).is_err());
    }
}
