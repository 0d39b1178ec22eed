//! The tempered classification target: log-density, gradient, metric tensor,
//! and the non-separable Hamiltonian.
//!
//! At inverse temperature `beta` the unnormalised log density is
//!
//! ```text
//! L_beta(x) = beta [ sum_n log Phi(y_n x_n) + log N(x; 0, K) ]
//!             + (1 - beta) log N(x; mu, Sigma)
//! ```
//!
//! with all Gaussian normalising constants included, so that the
//! normalisation of `exp(L_0)` is exactly one. The reference `N(mu, Sigma)`
//! is either the prior itself or a Gaussian whose precision splits as
//! `K^-1 + diag(sigma_tilde)^-1` (the form EP produces). The metric tensor is
//! the negative Hessian `G(x) = Lambda(x) + beta K^-1 + (1-beta) Sigma^-1`,
//! inverted through one or two rank-structured Cholesky rounds rather than
//! ever forming `K^-1`.

use ndarray::{Array1, Array2};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky, solve_lower_vec, solve_upper_vec, woodbury_downdate, CholFactor, SpdMatrix,
};
use crate::probit;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Likelihood part of the target. `None` makes the target a pure Gaussian
/// bridge (used to sanity-check annealing estimators on problems with known
/// normalisation).
#[derive(Debug, Clone)]
pub enum Likelihood {
    Probit { labels: Array1<f64> },
    None,
}

/// Gaussian reference `N(mu, Sigma)` with site-structured precision
/// `Sigma^-1 = K^-1 + diag(sigma_tilde)^-1`.
#[derive(Debug, Clone)]
pub struct GaussianReference {
    pub mu: Array1<f64>,
    pub sigma_tilde: Array1<f64>,
    pub sigma: SpdMatrix,
    pub chol_sigma: CholFactor,
    pub log_det_sigma: f64,
}

impl GaussianReference {
    /// Builds the reference from site variances: `Sigma` is assembled as
    /// `K - V^T V` through the same Cholesky identity the metric tensor
    /// uses, and `log |Sigma| = log |K| - 2 sum log L'_nn`.
    pub fn from_sites(
        k: &SpdMatrix,
        chol_k: &CholFactor,
        mu: Array1<f64>,
        sigma_tilde: Array1<f64>,
    ) -> Result<Self> {
        let n = k.order();
        if mu.len() != n || sigma_tilde.len() != n {
            return Err(Error::dims(format!(
                "reference moments have lengths {}/{} for a kernel of order {n}",
                mu.len(),
                sigma_tilde.len()
            )));
        }
        if sigma_tilde.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("site variances must be positive and finite"));
        }
        let t = sigma_tilde.mapv(|v| 1.0 / v.sqrt());
        let (sigma, neg_log_det) = woodbury_downdate(k, &t)?;
        let log_det_sigma = chol_k.log_det() - neg_log_det;
        let chol_sigma = cholesky(&sigma)?;
        Ok(GaussianReference {
            mu,
            sigma_tilde,
            sigma,
            chol_sigma,
            log_det_sigma,
        })
    }
}

#[derive(Debug)]
struct TargetCore {
    likelihood: Likelihood,
    k: SpdMatrix,
    chol_k: CholFactor,
    reference: Option<GaussianReference>,
}

/// Immutable tempered target, cheap to re-temper via [`TemperedTarget::with_beta`].
#[derive(Debug, Clone)]
pub struct TemperedTarget {
    core: Arc<TargetCore>,
    beta: f64,
}

/// Log-density value and gradient.
#[derive(Debug, Clone)]
pub struct TargetEval {
    pub l: f64,
    pub grad_l: Array1<f64>,
}

/// Everything the Riemannian sampler needs at one position: log density,
/// gradient, the inverse metric, its log-determinant, and the diagonal of
/// the metric's position derivative.
#[derive(Debug, Clone)]
pub struct MetricState {
    pub l: f64,
    pub grad_l: Array1<f64>,
    pub ginv: Array2<f64>,
    pub log_det_g: f64,
    pub dg: Array1<f64>,
}

/// Hamiltonian value and its position gradient.
#[derive(Debug, Clone)]
pub struct HamiltonianEval {
    pub h: f64,
    pub grad_x: Array1<f64>,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid(format!("beta must lie in [0, 1], got {beta}")));
    }
    Ok(())
}

impl TemperedTarget {
    /// Probit GPC target annealed from the prior.
    pub fn prior_reference(labels: Array1<f64>, k: SpdMatrix, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        if labels.len() != k.order() {
            return Err(Error::dims(format!(
                "{} labels for kernel of order {}",
                labels.len(),
                k.order()
            )));
        }
        probit::derivs(
            Array1::zeros(labels.len()).view(),
            labels.view(),
            0.0,
        )?;
        let chol_k = cholesky(&k)?;
        Ok(TemperedTarget {
            core: Arc::new(TargetCore {
                likelihood: Likelihood::Probit { labels },
                k,
                chol_k,
                reference: None,
            }),
            beta,
        })
    }

    /// Probit GPC target annealed from a Gaussian reference.
    pub fn gaussian_reference(
        labels: Array1<f64>,
        k: SpdMatrix,
        reference: GaussianReference,
        beta: f64,
    ) -> Result<Self> {
        check_beta(beta)?;
        if labels.len() != k.order() || reference.mu.len() != k.order() {
            return Err(Error::dims("labels, kernel and reference sizes disagree"));
        }
        probit::derivs(
            Array1::zeros(labels.len()).view(),
            labels.view(),
            0.0,
        )?;
        let chol_k = cholesky(&k)?;
        Ok(TemperedTarget {
            core: Arc::new(TargetCore {
                likelihood: Likelihood::Probit { labels },
                k,
                chol_k,
                reference: Some(reference),
            }),
            beta,
        })
    }

    /// Likelihood-free bridge between a Gaussian reference (or the prior)
    /// and the prior. With a reference, both endpoints are normalised
    /// Gaussians, so the bridge's log normalising-constant ratio is zero.
    pub fn gaussian_bridge(
        k: SpdMatrix,
        reference: Option<GaussianReference>,
        beta: f64,
    ) -> Result<Self> {
        check_beta(beta)?;
        if let Some(r) = &reference {
            if r.mu.len() != k.order() {
                return Err(Error::dims("kernel and reference sizes disagree"));
            }
        }
        let chol_k = cholesky(&k)?;
        Ok(TemperedTarget {
            core: Arc::new(TargetCore {
                likelihood: Likelihood::None,
                k,
                chol_k,
                reference,
            }),
            beta,
        })
    }

    /// Same target at another temperature; shares the heavy state.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(TemperedTarget {
            core: Arc::clone(&self.core),
            beta,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn len(&self) -> usize {
        self.core.k.order()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn kernel(&self) -> &SpdMatrix {
        &self.core.k
    }

    pub fn chol_kernel(&self) -> &CholFactor {
        &self.core.chol_k
    }

    pub fn labels(&self) -> Option<&Array1<f64>> {
        match &self.core.likelihood {
            Likelihood::Probit { labels } => Some(labels),
            Likelihood::None => None,
        }
    }

    pub fn reference(&self) -> Option<&GaussianReference> {
        self.core.reference.as_ref()
    }

    /// `L_beta(x)` and its gradient.
    pub fn derivatives(&self, x: &Array1<f64>) -> TargetEval {
        let (eval, _) = self.derivs_inner(x, false);
        eval
    }

    /// Metric-tensor bundle at `x` (Hessian-based metric, Woodbury inverse).
    pub fn riemann_metric(&self, x: &Array1<f64>) -> Result<MetricState> {
        let (eval, parts) = self.derivs_inner(x, true);
        let (_, _, lambda, dg) = parts.expect("metric parts requested");
        let n = self.len();
        let s = lambda.mapv(f64::sqrt);
        let (ginv, log_det_g) = match &self.core.reference {
            None => {
                // G = Lambda + K^-1 (the beta-weighted prior terms recombine).
                let (ginv, cap_log_det) = woodbury_downdate(&self.core.k, &s)?;
                (ginv, -self.core.chol_k.log_det() + cap_log_det)
            }
            Some(r) => {
                // A^-1 = K^-1 + (1 - beta) diag(sigma_tilde)^-1, then
                // G = Lambda + A^-1.
                let rt = (1.0 - self.beta).sqrt();
                let t = r.sigma_tilde.mapv(|v| rt / v.sqrt());
                let (a, cap_t) = woodbury_downdate(&self.core.k, &t)?;
                let log_det_a_inv = -self.core.chol_k.log_det() + cap_t;
                let (ginv, cap_s) = woodbury_downdate(&a, &s)?;
                (ginv, log_det_a_inv + cap_s)
            }
        };
        debug_assert_eq!(ginv.order(), n);
        Ok(MetricState {
            l: eval.l,
            grad_l: eval.grad_l,
            ginv: ginv.into_entries(),
            log_det_g,
            dg,
        })
    }

    fn derivs_inner(
        &self,
        x: &Array1<f64>,
        want_metric: bool,
    ) -> (TargetEval, Option<(f64, Array1<f64>, Array1<f64>, Array1<f64>)>) {
        let n = self.len();
        assert_eq!(x.len(), n, "position has wrong dimension");
        let (loglik, grad_ll, lambda, dg) = match &self.core.likelihood {
            Likelihood::Probit { labels } => {
                let d = probit::derivs(x.view(), labels.view(), self.beta)
                    .expect("labels validated at construction");
                (d.loglik, d.grad, d.lambda, d.dg)
            }
            Likelihood::None => (
                0.0,
                Array1::zeros(n),
                Array1::zeros(n),
                Array1::zeros(n),
            ),
        };
        let beta = self.beta;
        let chol_k = &self.core.chol_k;
        let f = solve_lower_vec(chol_k.lower().view(), x.view()).expect("dims checked");
        let (l, grad_l) = match &self.core.reference {
            None => {
                let l = beta * loglik
                    - 0.5 * n as f64 * LN_2PI
                    - 0.5 * chol_k.log_det()
                    - 0.5 * f.dot(&f);
                let kinv_x =
                    solve_upper_vec(chol_k.lower().t(), f.view()).expect("dims checked");
                let grad = grad_ll.mapv(|g| beta * g) - &kinv_x;
                (l, grad)
            }
            Some(r) => {
                let diff = x - &r.mu;
                let f2 = solve_lower_vec(r.chol_sigma.lower().view(), diff.view())
                    .expect("dims checked");
                let l = beta * loglik
                    - 0.5 * n as f64 * LN_2PI
                    - beta * (0.5 * chol_k.log_det() + 0.5 * f.dot(&f))
                    - (1.0 - beta) * (0.5 * r.log_det_sigma + 0.5 * f2.dot(&f2));
                let kinv_x =
                    solve_upper_vec(chol_k.lower().t(), f.view()).expect("dims checked");
                let sinv_diff = solve_upper_vec(r.chol_sigma.lower().t(), f2.view())
                    .expect("dims checked");
                let grad = grad_ll.mapv(|g| beta * g)
                    - &kinv_x.mapv(|v| beta * v)
                    - &sinv_diff.mapv(|v| (1.0 - beta) * v);
                (l, grad)
            }
        };
        let eval = TargetEval { l, grad_l };
        let parts = want_metric.then_some((loglik, grad_ll, lambda, dg));
        (eval, parts)
    }
}

impl MetricState {
    /// Hamiltonian `H = p^T G^-1 p / 2 + log|G| / 2 - L` (constant
    /// `N/2 log 2pi` dropped; it cancels in acceptance ratios) and its
    /// position gradient, using that `dG/dx_n` has a single non-zero entry.
    pub fn hamiltonian_and_gradient(&self, p: &Array1<f64>) -> HamiltonianEval {
        let w = self.ginv.dot(p);
        let h = 0.5 * p.dot(&w) + 0.5 * self.log_det_g - self.l;
        let n = p.len();
        let mut grad_x = Array1::zeros(n);
        for i in 0..n {
            grad_x[i] =
                0.5 * self.dg[i] * self.ginv[[i, i]] - 0.5 * w[i] * w[i] * self.dg[i]
                    - self.grad_l[i];
        }
        HamiltonianEval { h, grad_x }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{build_kernel, inverse_from_chol, KernelSpec};
    use ndarray::{arr1, arr2};
    use rand::Rng;

    fn toy_kernel(n: usize, seed: u64) -> SpdMatrix {
        let mut rng = crate::rng::stream_rng(seed, 0);
        let pts = Array2::from_shape_fn((n, 2), |_| rng.random::<f64>() * 3.0);
        let spec = KernelSpec::with_default_jitter(1.2, 1.5).unwrap();
        build_kernel(pts.view(), &spec).unwrap()
    }

    fn random_labels(n: usize, seed: u64) -> Array1<f64> {
        let mut rng = crate::rng::stream_rng(seed, 1);
        Array1::from_shape_fn(n, |_| if rng.random::<bool>() { 1.0 } else { -1.0 })
    }

    fn reference_from(k: &SpdMatrix, seed: u64) -> GaussianReference {
        let mut rng = crate::rng::stream_rng(seed, 2);
        let n = k.order();
        let chol_k = cholesky(k).unwrap();
        let mu = Array1::from_shape_fn(n, |_| rng.random::<f64>() - 0.5);
        let st = Array1::from_shape_fn(n, |_| 0.5 + rng.random::<f64>() * 2.0);
        GaussianReference::from_sites(k, &chol_k, mu, st).unwrap()
    }

    #[test]
    fn prior_value_at_origin() {
        let k = toy_kernel(4, 3);
        let y = random_labels(4, 3);
        let t = TemperedTarget::prior_reference(y, k.clone(), 1.0).unwrap();
        let e = t.derivatives(&Array1::zeros(4));
        let chol = cholesky(&k).unwrap();
        let want = -4.0 * (2.0f64).ln() - 2.0 * LN_2PI - 0.5 * chol.log_det();
        assert!((e.l - want).abs() < 1e-12);
    }

    #[test]
    fn beta_zero_reference_is_exact_gaussian_density() {
        let k = toy_kernel(5, 7);
        let y = random_labels(5, 7);
        let r = reference_from(&k, 7);
        let sigma_dense = r.sigma.entries().clone();
        let mu = r.mu.clone();
        let t = TemperedTarget::gaussian_reference(y, k, r, 0.0).unwrap();
        let mut rng = crate::rng::stream_rng(8, 0);
        for _ in 0..10 {
            let x = Array1::from_shape_fn(5, |_| rng.random::<f64>() * 4.0 - 2.0);
            let e = t.derivatives(&x);
            // Dense quadratic-form oracle.
            let s = SpdMatrix::new(sigma_dense.clone()).unwrap();
            let c = cholesky(&s).unwrap();
            let diff = &x - &mu;
            let half = solve_lower_vec(c.lower().view(), diff.view()).unwrap();
            let want = -0.5 * 5.0 * LN_2PI - 0.5 * c.log_det() - 0.5 * half.dot(&half);
            assert!((e.l - want).abs() < 1e-10, "{} vs {}", e.l, want);
        }
    }

    #[test]
    fn gradient_matches_finite_differences_both_branches() {
        let n = 6;
        let k = toy_kernel(n, 11);
        let y = random_labels(n, 11);
        let r = reference_from(&k, 11);
        let targets = [
            TemperedTarget::prior_reference(y.clone(), k.clone(), 0.73).unwrap(),
            TemperedTarget::gaussian_reference(y, k, r, 0.35).unwrap(),
        ];
        let mut rng = crate::rng::stream_rng(12, 0);
        for t in &targets {
            for _ in 0..5 {
                let x = Array1::from_shape_fn(n, |_| rng.random::<f64>() * 3.0 - 1.5);
                let e = t.derivatives(&x);
                let scale = e
                    .grad_l
                    .iter()
                    .map(|v| v.abs())
                    .fold(1e-8, f64::max);
                for i in 0..n {
                    let h = 1e-5 * x[i].abs().max(1.0);
                    let mut xp = x.clone();
                    xp[i] += h;
                    let mut xm = x.clone();
                    xm[i] -= h;
                    let fd = (t.derivatives(&xp).l - t.derivatives(&xm).l) / (2.0 * h);
                    assert!(
                        ((e.grad_l[i] - fd) / scale).abs() < 1e-6,
                        "component {i}: {} vs {}",
                        e.grad_l[i],
                        fd
                    );
                }
            }
        }
    }

    /// Dense oracle for G = Lambda + beta K^-1 + (1-beta) Sigma^-1.
    fn dense_metric(t: &TemperedTarget, x: &Array1<f64>) -> (Array2<f64>, f64) {
        let n = t.len();
        let lambda = match t.labels() {
            Some(y) => probit::derivs(x.view(), y.view(), t.beta()).unwrap().lambda,
            None => Array1::zeros(n),
        };
        let kinv = inverse_from_chol(t.chol_kernel());
        let mut g = kinv.clone();
        match t.reference() {
            None => {
                // beta K^-1 + (1-beta) K^-1 = K^-1 either way.
            }
            Some(r) => {
                let sinv = inverse_from_chol(&r.chol_sigma);
                let b = t.beta();
                g = kinv.mapv(|v| b * v) + &sinv.mapv(|v| (1.0 - b) * v);
            }
        }
        for i in 0..n {
            g[[i, i]] += lambda[i];
        }
        let gm = SpdMatrix::new((g.clone() + g.t()).mapv(|v| 0.5 * v)).unwrap();
        let c = cholesky(&gm).unwrap();
        (inverse_from_chol(&c), c.log_det())
    }

    #[test]
    fn metric_matches_dense_oracle_prior_branch() {
        let n = 7;
        let k = toy_kernel(n, 21);
        let y = random_labels(n, 21);
        let t = TemperedTarget::prior_reference(y, k, 1.0).unwrap();
        let mut rng = crate::rng::stream_rng(22, 0);
        for _ in 0..5 {
            let x = Array1::from_shape_fn(n, |_| rng.random::<f64>() * 2.0 - 1.0);
            let m = t.riemann_metric(&x).unwrap();
            let (ginv_want, logdet_want) = dense_metric(&t, &x);
            let num: f64 = (&m.ginv - &ginv_want).iter().map(|v| v * v).sum();
            let den: f64 = ginv_want.iter().map(|v| v * v).sum();
            assert!((num / den).sqrt() < 1e-8);
            assert!((m.log_det_g - logdet_want).abs() < 1e-8 * logdet_want.abs().max(1.0));
        }
    }

    #[test]
    fn metric_matches_dense_oracle_reference_branch() {
        let n = 6;
        let k = toy_kernel(n, 31);
        let y = random_labels(n, 31);
        let r = reference_from(&k, 31);
        for beta in [0.0, 0.4, 0.9, 1.0] {
            let t =
                TemperedTarget::gaussian_reference(y.clone(), k.clone(), r.clone(), beta).unwrap();
            let mut rng = crate::rng::stream_rng(32, 0);
            let x = Array1::from_shape_fn(n, |_| rng.random::<f64>() * 2.0 - 1.0);
            let m = t.riemann_metric(&x).unwrap();
            let (ginv_want, logdet_want) = dense_metric(&t, &x);
            let num: f64 = (&m.ginv - &ginv_want).iter().map(|v| v * v).sum();
            let den: f64 = ginv_want.iter().map(|v| v * v).sum();
            assert!((num / den).sqrt() < 1e-8, "beta={beta}");
            assert!(
                (m.log_det_g - logdet_want).abs() < 1e-8 * logdet_want.abs().max(1.0),
                "beta={beta}"
            );
        }
    }

    #[test]
    fn zero_lambda_collapses_metric_to_kernel() {
        let k = toy_kernel(5, 41);
        let y = random_labels(5, 41);
        let t = TemperedTarget::prior_reference(y, k.clone(), 0.0).unwrap();
        let m = t.riemann_metric(&Array1::zeros(5)).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(m.ginv[[i, j]], k.entries()[[i, j]]);
            }
        }
        assert!((m.log_det_g + cholesky(&k).unwrap().log_det()).abs() < 1e-12);
    }

    #[test]
    fn metric_inverse_matches_hessian_of_l() {
        let n = 5;
        let k = toy_kernel(n, 51);
        let y = random_labels(n, 51);
        let r = reference_from(&k, 51);
        let t = TemperedTarget::gaussian_reference(y, k, r, 0.62).unwrap();
        let mut rng = crate::rng::stream_rng(52, 0);
        let x = Array1::from_shape_fn(n, |_| rng.random::<f64>() - 0.5);
        let m = t.riemann_metric(&x).unwrap();
        let g = {
            let sm = SpdMatrix::new(m.ginv.clone()).unwrap();
            inverse_from_chol(&cholesky(&sm).unwrap())
        };
        // Central differences of the gradient give the Hessian; G = -Hess.
        let h = 1e-5;
        for i in 0..n {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let gp = t.derivatives(&xp).grad_l;
            let gm = t.derivatives(&xm).grad_l;
            for j in 0..n {
                let hess_ij = (gp[j] - gm[j]) / (2.0 * h);
                let want = -hess_ij;
                assert!(
                    (g[[i, j]] - want).abs() < 1e-4 * want.abs().max(1.0),
                    "({i},{j}): {} vs {}",
                    g[[i, j]],
                    want
                );
            }
        }
    }

    #[test]
    fn trace_term_equals_elementwise_form() {
        let n = 6;
        let k = toy_kernel(n, 61);
        let y = random_labels(n, 61);
        let t = TemperedTarget::prior_reference(y, k, 0.8).unwrap();
        let mut rng = crate::rng::stream_rng(62, 0);
        let x = Array1::from_shape_fn(n, |_| rng.random::<f64>() - 0.5);
        let m = t.riemann_metric(&x).unwrap();
        for i in 0..n {
            // dG/dx_i is zero except entry (i, i) = dg[i]; the trace
            // tr(G^-1 dG/dx_i) therefore reduces to Ginv[i,i] dg[i].
            let mut dmat = Array2::<f64>::zeros((n, n));
            dmat[[i, i]] = m.dg[i];
            let prod = m.ginv.dot(&dmat);
            let trace: f64 = (0..n).map(|j| prod[[j, j]]).sum();
            assert_eq!(trace, m.ginv[[i, i]] * m.dg[i]);
        }
    }

    #[test]
    fn hamiltonian_zero_momentum() {
        let k = toy_kernel(4, 71);
        let y = random_labels(4, 71);
        let t = TemperedTarget::prior_reference(y, k, 1.0).unwrap();
        let x = arr1(&[0.3, -0.2, 0.5, 0.1]);
        let m = t.riemann_metric(&x).unwrap();
        let he = m.hamiltonian_and_gradient(&Array1::zeros(4));
        assert_eq!(he.h, 0.5 * m.log_det_g - m.l);
    }

    #[test]
    fn hamiltonian_gradient_matches_finite_differences() {
        let n = 4;
        let k = toy_kernel(n, 81);
        let y = random_labels(n, 81);
        let t = TemperedTarget::prior_reference(y, k, 0.9).unwrap();
        let mut rng = crate::rng::stream_rng(82, 0);
        let x = Array1::from_shape_fn(n, |_| rng.random::<f64>() - 0.5);
        let p = Array1::from_shape_fn(n, |_| rng.random::<f64>() * 2.0 - 1.0);
        let m = t.riemann_metric(&x).unwrap();
        let he = m.hamiltonian_and_gradient(&p);
        for i in 0..n {
            let h = 1e-5;
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let hp = t.riemann_metric(&xp).unwrap().hamiltonian_and_gradient(&p).h;
            let hm = t.riemann_metric(&xm).unwrap().hamiltonian_and_gradient(&p).h;
            let fd = (hp - hm) / (2.0 * h);
            assert!(
                ((he.grad_x[i] - fd) / fd.abs().max(1e-4)).abs() < 1e-5,
                "component {i}: {} vs {}",
                he.grad_x[i],
                fd
            );
        }
    }

    #[test]
    fn constant_metric_gradient_is_gaussian_pull() {
        let k = SpdMatrix::new(arr2(&[[2.0, 0.0], [0.0, 3.0]])).unwrap();
        let chol_k = cholesky(&k).unwrap();
        let mu = arr1(&[0.4, -0.7]);
        let st = arr1(&[1.0, 2.0]);
        let r = GaussianReference::from_sites(&k, &chol_k, mu.clone(), st).unwrap();
        let sinv = inverse_from_chol(&r.chol_sigma);
        let y = arr1(&[1.0, -1.0]);
        let t = TemperedTarget::gaussian_reference(y, k, r, 0.0).unwrap();
        let x = arr1(&[1.0, 2.0]);
        let m = t.riemann_metric(&x).unwrap();
        let he = m.hamiltonian_and_gradient(&arr1(&[0.3, -0.1]));
        let want = sinv.dot(&(&x - &mu));
        for i in 0..2 {
            assert!((he.grad_x[i] - want[i]).abs() < 1e-10);
            assert_eq!(m.dg[i], 0.0);
        }
    }

    #[test]
    fn metric_is_symmetric_and_positive() {
        let n = 8;
        let k = toy_kernel(n, 91);
        let y = random_labels(n, 91);
        let t = TemperedTarget::prior_reference(y, k, 1.0).unwrap();
        let mut rng = crate::rng::stream_rng(92, 0);
        let x = Array1::from_shape_fn(n, |_| rng.random::<f64>() * 2.0 - 1.0);
        let m = t.riemann_metric(&x).unwrap();
        for i in 0..n {
            for j in 0..n {
                assert!((m.ginv[[i, j]] - m.ginv[[j, i]]).abs() <= 1e-10 * m.ginv[[i, i]].abs());
            }
        }
        for _ in 0..100 {
            let p = Array1::from_shape_fn(n, |_| rng.random::<f64>() * 2.0 - 1.0);
            assert!(p.dot(&m.ginv.dot(&p)) > 0.0);
        }
    }
}
