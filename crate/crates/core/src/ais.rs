//! Annealed importance sampling over a geometric inverse-temperature grid.
//!
//! Each run draws an exact sample from the reference (the prior, or the EP
//! Gaussian carried by the target), then walks the grid `0 = beta_0 < ... <
//! beta_B = 1`, accumulating `L_{beta_b}(x) - L_{beta_{b-1}}(x)` *before*
//! applying one HMC or RMHMC transition targeting `p_{beta_b}`. Because the
//! tempered log-density includes all Gaussian normalising constants, the
//! reference is exactly normalised and `log Z` is just the log-mean of the
//! run weights. Runs are independent and execute in parallel on distinct
//! counter streams; the reduction order is fixed, so results do not depend
//! on thread scheduling.

use ndarray::Array1;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mcmc::{hmc_transition, rmhmc_transition, HmcConfig, RmhmcConfig};
use crate::rng::stream_rng;
use crate::target::TemperedTarget;
use rand::Rng;
use rand_distr::StandardNormal;

/// Transition kernel applied once per grid point.
#[derive(Debug, Clone)]
pub enum TransitionKernel {
    Hmc(HmcConfig),
    Rmhmc(RmhmcConfig),
}

/// AIS settings. The annealing start is the target's reference: a target
/// built with a Gaussian reference anneals from it, one built on the prior
/// anneals from the prior.
#[derive(Debug, Clone)]
pub struct AisConfig {
    /// Number of tempered distributions past the reference (grid size B).
    pub b_count: usize,
    /// Smallest non-zero inverse temperature of the geometric grid.
    pub beta_min: f64,
    /// Independent AIS runs (particles).
    pub runs: usize,
    pub kernel: TransitionKernel,
}

impl AisConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if self.b_count < 2 {
            return Err(Error::invalid("b_count must be at least 2"));
        }
        if !(self.beta_min > 0.0 && self.beta_min < 1.0) {
            return Err(Error::invalid("beta_min must lie strictly in (0, 1)"));
        }
        if self.runs == 0 {
            return Err(Error::invalid("runs must be at least 1"));
        }
        if let TransitionKernel::Hmc(cfg) = &self.kernel {
            if cfg.mass_diag.len() != n {
                return Err(Error::dims(
                    "HMC mass diagonal does not match the target dimension",
                ));
            }
        }
        Ok(())
    }
}

/// Outcome of one AIS estimate.
#[derive(Debug, Clone)]
pub struct AisResult {
    /// `logmeanexp` of the run weights.
    pub log_z: f64,
    pub log_weights: Array1<f64>,
    /// Effective sample size of the normalised run weights.
    pub ess: f64,
    /// Acceptance fraction of the transition kernel at each grid point.
    pub per_beta_accept: Array1<f64>,
    /// Runs whose weight went non-finite (recorded as -inf).
    pub diverged_runs: usize,
}

/// Geometric grid `0, beta_min^((B-1)/(B-1)), ..., beta_min^(0/(B-1))`:
/// `B + 1` values, first exactly 0, last exactly 1, strictly increasing.
pub fn geometric_grid(b_count: usize, beta_min: f64) -> Result<Vec<f64>> {
    if b_count < 2 {
        return Err(Error::invalid("grid needs at least 2 steps"));
    }
    if !(beta_min > 0.0 && beta_min < 1.0) {
        return Err(Error::invalid("beta_min must lie strictly in (0, 1)"));
    }
    let mut grid = Vec::with_capacity(b_count + 1);
    grid.push(0.0);
    for b in 1..=b_count {
        let exponent = (b_count - b) as f64 / (b_count - 1) as f64;
        grid.push(beta_min.powf(exponent));
    }
    Ok(grid)
}

/// `log( mean(exp(v)) )` with max-shift stability; exact on constant input.
pub fn log_mean_exp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::invalid("log_mean_exp of empty vector"));
    }
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let sum: f64 = v.iter().map(|&x| (x - max).exp()).sum();
    Ok(max + (sum / v.len() as f64).ln())
}

struct RunOutcome {
    log_w: f64,
    accepts: Vec<bool>,
}

fn run_one(
    target: &TemperedTarget,
    grid: &[f64],
    cfg: &AisConfig,
    seed: u64,
    run_idx: u64,
) -> RunOutcome {
    let n = target.len();
    let mut rng = stream_rng(seed, run_idx);
    let noise = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
    // Exact draw from the beta = 0 endpoint.
    let mut x = match target.reference() {
        Some(r) => &r.mu + &r.chol_sigma.lower().dot(&noise),
        None => target.chol_kernel().lower().dot(&noise),
    };
    let b_count = grid.len() - 1;
    let mut accepts = vec![false; b_count];
    let base = target.with_beta(0.0).expect("beta 0 is valid");
    let mut l_prev = base.derivatives(&x).l;
    let mut log_w = 0.0;

    match &cfg.kernel {
        TransitionKernel::Hmc(kcfg) => {
            for b in 1..=b_count {
                let tb = target.with_beta(grid[b]).expect("grid values lie in [0,1]");
                let eval = tb.derivatives(&x);
                log_w += eval.l - l_prev;
                let (x1, eval1, acc) = hmc_transition(&tb, &x, &eval, kcfg, &mut rng);
                x = x1;
                l_prev = eval1.l;
                accepts[b - 1] = acc;
            }
        }
        TransitionKernel::Rmhmc(kcfg) => {
            for b in 1..=b_count {
                let tb = target.with_beta(grid[b]).expect("grid values lie in [0,1]");
                match tb.riemann_metric(&x) {
                    Ok(metric) => {
                        log_w += metric.l - l_prev;
                        let (x1, metric1, acc) = rmhmc_transition(&tb, &x, &metric, kcfg, &mut rng);
                        x = x1;
                        l_prev = metric1.l;
                        accepts[b - 1] = acc;
                    }
                    Err(_) => {
                        // Metric failure: still account the weight, skip the move.
                        let eval = tb.derivatives(&x);
                        log_w += eval.l - l_prev;
                        l_prev = eval.l;
                    }
                }
            }
        }
    }
    RunOutcome { log_w, accepts }
}

/// Runs `cfg.runs` independent AIS passes and combines them.
pub fn ais_estimate(
    target: &TemperedTarget,
    cfg: &AisConfig,
    seed: u64,
) -> Result<AisResult> {
    cfg.validate(target.len())?;
    let grid = geometric_grid(cfg.b_count, cfg.beta_min)?;
    let outcomes: Vec<RunOutcome> = (0..cfg.runs as u64)
        .into_par_iter()
        .map(|r| run_one(target, &grid, cfg, seed, r))
        .collect();

    let mut log_weights = Array1::zeros(cfg.runs);
    let mut diverged = 0usize;
    let mut accept_counts = vec![0usize; cfg.b_count];
    for (i, out) in outcomes.iter().enumerate() {
        log_weights[i] = if out.log_w.is_finite() {
            out.log_w
        } else {
            diverged += 1;
            f64::NEG_INFINITY
        };
        for (b, &a) in out.accepts.iter().enumerate() {
            accept_counts[b] += a as usize;
        }
    }
    let log_z = log_mean_exp(log_weights.as_slice().expect("contiguous"))?;
    let ess = match crate::smc::ess(&log_weights) {
        Ok(e) => e,
        Err(_) => f64::NAN,
    };
    let per_beta_accept = Array1::from_shape_fn(cfg.b_count, |b| {
        accept_counts[b] as f64 / cfg.runs as f64
    });
    Ok(AisResult {
        log_z,
        log_weights,
        ess,
        per_beta_accept,
        diverged_runs: diverged,
    })
}
