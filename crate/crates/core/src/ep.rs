//! Expectation Propagation for the probit classification model.
//!
//! Sequential moment-matching with damped site updates, in the classical
//! parameterisation for this model: each likelihood factor is approximated
//! by an unnormalised Gaussian site with precision `tau_n` and
//! precision-times-mean `nu_n`, so the posterior approximation is
//! `q(x) = N(mu, Sigma)` with `Sigma^-1 = K^-1 + diag(tau)`.
//!
//! The fit doubles as the reference distribution for annealed estimators
//! (via [`ep_reference`]) and produces its own marginal-likelihood estimate
//! `log_z_ep`, which for this model is known to be very accurate.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, solve_lower_vec, SpdMatrix};
use crate::probit::{log_ndtr, ratio_log};
use crate::target::GaussianReference;

const DAMPING_INIT: f64 = 0.8;
const DAMPING_FLOOR: f64 = 0.1;

/// Converged (or best-effort) EP approximation.
#[derive(Debug, Clone)]
pub struct EpApprox {
    /// Posterior mean of `q`.
    pub mu: Array1<f64>,
    /// Site variances, the diagonal of `Sigma~` (inverse site precisions).
    pub sigma_tilde: Array1<f64>,
    /// Site means `nu_n / tau_n`.
    pub site_means: Array1<f64>,
    /// EP estimate of `log p(y)`.
    pub log_z_ep: f64,
    /// Sweeps actually performed.
    pub iterations: usize,
    /// Whether the last sweep's largest site-parameter change fell below the
    /// tolerance.
    pub converged: bool,
}

struct SiteState {
    tau: Array1<f64>,
    nu: Array1<f64>,
    sigma: Array2<f64>,
    mu: Array1<f64>,
}

impl SiteState {
    /// Rebuilds `Sigma = (K^-1 + diag(tau))^-1` and `mu = Sigma nu` from
    /// scratch, clearing the drift accumulated by rank-one updates.
    fn refresh(&mut self, k: &SpdMatrix) -> Result<()> {
        let t = self.tau.mapv(f64::sqrt);
        let (sigma, _) = crate::linalg::woodbury_downdate(k, &t)?;
        self.sigma = sigma.into_entries();
        self.mu = self.sigma.dot(&self.nu);
        Ok(())
    }
}

/// Moments of the tilted distribution `N(x; m, v) Phi(y x)`, all computed
/// through the stable CDF-ratio primitive.
fn tilted_update(y: f64, m_cav: f64, v_cav: f64) -> (f64, f64, f64) {
    let denom = (1.0 + v_cav).sqrt();
    let u = y * m_cav / denom;
    let ratio = ratio_log(u).exp();
    let m_hat = m_cav + y * v_cav * ratio / denom;
    let v_hat = v_cav - v_cav * v_cav * ratio * (u + ratio) / (1.0 + v_cav);
    (u, m_hat, v_hat)
}

/// Fits EP site parameters by sequential sweeps in index order.
///
/// Returns with `converged = false` when `max_sweeps` runs out; negative
/// cavity variances trigger damping halvings and only the damping floor is a
/// hard error.
pub fn ep_fit(
    y: &Array1<f64>,
    k: &SpdMatrix,
    tol: f64,
    max_sweeps: usize,
) -> Result<EpApprox> {
    let n = k.order();
    if y.len() != n {
        return Err(Error::dims(format!(
            "{} labels for kernel of order {n}",
            y.len()
        )));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::invalid("labels must be -1 or +1"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if max_sweeps == 0 {
        return Err(Error::invalid("max_sweeps must be at least 1"));
    }
    let mut state = SiteState {
        tau: Array1::zeros(n),
        nu: Array1::zeros(n),
        sigma: k.entries().clone(),
        mu: Array1::zeros(n),
    };
    let mut damping = DAMPING_INIT;
    let mut negative_cavity_events = 0usize;
    let mut converged = false;
    let mut sweeps = 0usize;

    while sweeps < max_sweeps {
        sweeps += 1;
        let mut max_delta = 0.0f64;
        for i in 0..n {
            let s_ii = state.sigma[[i, i]];
            let cav_prec = 1.0 / s_ii - state.tau[i];
            if !(cav_prec > 0.0) {
                negative_cavity_events += 1;
                damping *= 0.5;
                if damping < DAMPING_FLOOR {
                    return Err(Error::EpDampingFloor {
                        events: negative_cavity_events,
                    });
                }
                continue;
            }
            let cav_nat = state.mu[i] / s_ii - state.nu[i];
            let m_cav = cav_nat / cav_prec;
            let v_cav = 1.0 / cav_prec;
            let (_, m_hat, v_hat) = tilted_update(y[i], m_cav, v_cav);
            let tau_star = (1.0 / v_hat - cav_prec).max(0.0);
            let nu_star = m_hat / v_hat - cav_nat;
            let new_tau = state.tau[i] + damping * (tau_star - state.tau[i]);
            let new_nu = state.nu[i] + damping * (nu_star - state.nu[i]);
            max_delta = max_delta
                .max((new_tau - state.tau[i]).abs())
                .max((new_nu - state.nu[i]).abs());
            let d_tau = new_tau - state.tau[i];
            let scale = d_tau / (1.0 + d_tau * s_ii);
            let col = state.sigma.column(i).to_owned();
            for r in 0..n {
                for c in 0..n {
                    state.sigma[[r, c]] -= scale * col[r] * col[c];
                }
            }
            state.tau[i] = new_tau;
            state.nu[i] = new_nu;
            state.mu = state.sigma.dot(&state.nu);
        }
        state.refresh(k)?;
        if max_delta < tol {
            converged = true;
            break;
        }
    }

    let log_z_ep = ep_log_z(y, k, &state)?;
    if state.tau.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Internal(
            "EP finished with a non-positive site precision".into(),
        ));
    }
    Ok(EpApprox {
        mu: state.mu.clone(),
        sigma_tilde: state.tau.mapv(|t| 1.0 / t),
        site_means: Array1::from_shape_fn(n, |i| state.nu[i] / state.tau[i]),
        log_z_ep,
        iterations: sweeps,
        converged,
    })
}

/// EP marginal-likelihood estimate from a fitted state: the product of the
/// site normalisers times the Gaussian convolution `N(m; 0, K + V)`, written
/// so the `2 pi` factors cancel.
fn ep_log_z(y: &Array1<f64>, k: &SpdMatrix, state: &SiteState) -> Result<f64> {
    let n = k.order();
    if state.tau.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Internal(
            "log Z requires strictly positive site precisions".into(),
        ));
    }
    let mut acc = 0.0;
    for i in 0..n {
        let s_ii = state.sigma[[i, i]];
        let cav_prec = 1.0 / s_ii - state.tau[i];
        if !(cav_prec > 0.0) {
            return Err(Error::Internal("negative cavity at convergence".into()));
        }
        let cav_nat = state.mu[i] / s_ii - state.nu[i];
        let m_cav = cav_nat / cav_prec;
        let v_cav = 1.0 / cav_prec;
        let u = y[i] * m_cav / (1.0 + v_cav).sqrt();
        let v_site = 1.0 / state.tau[i];
        let m_site = state.nu[i] / state.tau[i];
        let spread = v_cav + v_site;
        acc += log_ndtr(u) + 0.5 * spread.ln() + (m_cav - m_site).powi(2) / (2.0 * spread);
    }
    // - log N(m; 0, K + V) parts, constants already cancelled against the
    // site terms above.
    let mut b = k.entries().clone();
    for i in 0..n {
        b[[i, i]] += 1.0 / state.tau[i];
    }
    let chol_b = cholesky(&SpdMatrix::new(b)?)?;
    let m = Array1::from_shape_fn(n, |i| state.nu[i] / state.tau[i]);
    let half = solve_lower_vec(chol_b.lower().view(), m.view())?;
    Ok(acc - 0.5 * chol_b.log_det() - 0.5 * half.dot(&half))
}

/// Packages a fit as the Gaussian reference for tempered targets:
/// `Sigma = (K^-1 + Sigma~^-1)^-1` assembled by the stable downdate, with
/// `log |Sigma| = log |K| - 2 sum log L'_nn`.
pub fn ep_reference(approx: &EpApprox, k: &SpdMatrix) -> Result<GaussianReference> {
    let chol_k = cholesky(k)?;
    GaussianReference::from_sites(
        k,
        &chol_k,
        approx.mu.clone(),
        approx.sigma_tilde.clone(),
    )
}
