//! Resample-move SMC on the sign-constrained representation.
//!
//! Particles live in the augmented space `z ~ N(0, K + I)`; the likelihood
//! enters as indicator constraints `y_n z_n >= 0`, introduced one at a time.
//! Each introduction multiplies particle weights by 0 or 1 and contributes
//! the weighted survival fraction to `log Z`. When the effective sample size
//! drops below a threshold fraction of the particle count, the system is
//! residual-resampled and refreshed with truncated-Gaussian Gibbs sweeps
//! restricted to the constraints introduced so far.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, SpdMatrix};
use crate::mcmc::GibbsSampler;
use crate::rng::{stream_rng, GLOBAL_STREAM};

/// Resample-move settings.
#[derive(Debug, Clone)]
pub struct RmConfig {
    pub r_particles: usize,
    /// Resample when `ess < resample_threshold * R`.
    pub resample_threshold: f64,
    /// Gibbs sweeps applied to every particle after each resampling.
    pub sweeps_per_move: usize,
    pub seed: u64,
    /// Introduce constraints in a seeded random order instead of index order.
    /// The order only affects variance, never the estimand.
    pub permute_constraints: bool,
}

impl RmConfig {
    pub fn new(r_particles: usize, seed: u64) -> Self {
        RmConfig {
            r_particles,
            resample_threshold: 0.9,
            sweeps_per_move: 2,
            seed,
            permute_constraints: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.r_particles < 2 {
            return Err(Error::invalid("need at least 2 particles"));
        }
        if !(self.resample_threshold > 0.0 && self.resample_threshold <= 1.0) {
            return Err(Error::invalid("resample threshold must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Weighted particle population.
#[derive(Debug, Clone)]
pub struct ParticleSystem {
    /// `R x N` matrix of augmented-space states.
    pub particles: Array2<f64>,
    pub log_weights: Array1<f64>,
    /// Number of likelihood constraints introduced so far.
    pub constraints_active: usize,
    /// Accumulated sum of log mean incremental weights.
    pub log_z_partial: f64,
}

/// Run diagnostics, including the final population for inspection.
#[derive(Debug, Clone)]
pub struct RmDiagnostics {
    /// ESS recorded right after each constraint introduction.
    pub ess_trace: Vec<f64>,
    pub resample_count: usize,
    /// The order constraints were introduced in (site indices).
    pub constraint_order: Vec<usize>,
    pub final_system: ParticleSystem,
}

/// Effective sample size `(sum w)^2 / sum w^2` of normalised weights.
pub fn ess(log_weights: &Array1<f64>) -> Result<f64> {
    let max = log_weights
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::ParticleCollapse { constraint: None });
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for &lw in log_weights {
        let w = (lw - max).exp();
        sum += w;
        sum_sq += w * w;
    }
    Ok(sum * sum / sum_sq)
}

/// Residual resampling: parent `r` deterministically contributes
/// `floor(R w_r)` copies, and the remaining slots are drawn multinomially
/// from the residual weights, so `E[count_r] = R w_r` exactly.
pub fn residual_resample(
    log_weights: &Array1<f64>,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    let r_count = log_weights.len();
    let max = log_weights
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::ParticleCollapse { constraint: None });
    }
    let w: Vec<f64> = log_weights.iter().map(|&lw| (lw - max).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut parents = Vec::with_capacity(r_count);
    let mut residuals = Vec::with_capacity(r_count);
    for (idx, &wi) in w.iter().enumerate() {
        let mut scaled = wi * r_count as f64 / total;
        // Snap near-integer expectations so exactly-integral cases stay
        // deterministic under round-off.
        let rounded = scaled.round();
        if (scaled - rounded).abs() < 1e-9 {
            scaled = rounded;
        }
        let copies = scaled.floor() as usize;
        for _ in 0..copies {
            parents.push(idx);
        }
        residuals.push(scaled - copies as f64);
    }
    let leftover = r_count - parents.len();
    if leftover > 0 {
        let res_total: f64 = residuals.iter().sum();
        for _ in 0..leftover {
            let mut u = rng.random::<f64>() * res_total;
            let mut chosen = r_count - 1;
            for (idx, &res) in residuals.iter().enumerate() {
                if u < res {
                    chosen = idx;
                    break;
                }
                u -= res;
            }
            parents.push(chosen);
        }
    }
    debug_assert_eq!(parents.len(), r_count);
    Ok(parents)
}

/// Full resample-move estimate of `log Z`.
pub fn rm_estimate(
    y: &Array1<f64>,
    k: &SpdMatrix,
    cfg: &RmConfig,
) -> Result<(f64, RmDiagnostics)> {
    cfg.validate()?;
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
    let r_count = cfg.r_particles;
    let sampler = GibbsSampler::new(k)?;
    let chol_aug = cholesky(&k.shifted_diagonal(1.0))?;
    let mut rng = stream_rng(cfg.seed, GLOBAL_STREAM);

    // Exact draws from N(0, K + I).
    let mut particles = Array2::zeros((r_count, n));
    for r in 0..r_count {
        let noise = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
        particles
            .row_mut(r)
            .assign(&chol_aug.lower().dot(&noise));
    }
    let mut log_weights = Array1::<f64>::zeros(r_count);

    let mut order: Vec<usize> = (0..n).collect();
    if cfg.permute_constraints {
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
    }

    let mut active = vec![false; n];
    let mut log_z = 0.0;
    let mut ess_trace = Vec::with_capacity(n);
    let mut resample_count = 0usize;
    let mut move_epoch = 0u64;

    for (step, &site) in order.iter().enumerate() {
        // Weighted survival fraction of the new indicator under the current
        // normalised weights.
        let max = log_weights
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::ParticleCollapse {
                constraint: Some(step + 1),
            });
        }
        let mut mass_all = 0.0;
        let mut mass_pass = 0.0;
        for r in 0..r_count {
            let w = (log_weights[r] - max).exp();
            mass_all += w;
            if y[site] * particles[[r, site]] >= 0.0 {
                mass_pass += w;
            }
        }
        if mass_pass == 0.0 {
            return Err(Error::ParticleCollapse {
                constraint: Some(step + 1),
            });
        }
        log_z += (mass_pass / mass_all).ln();
        for r in 0..r_count {
            if y[site] * particles[[r, site]] < 0.0 {
                log_weights[r] = f64::NEG_INFINITY;
            }
        }
        active[site] = true;

        let ess_now = ess(&log_weights)?;
        ess_trace.push(ess_now);
        if ess_now < cfg.resample_threshold * r_count as f64 {
            let parents = residual_resample(&log_weights, &mut rng)?;
            let old = particles.clone();
            for (r, &p) in parents.iter().enumerate() {
                particles.row_mut(r).assign(&old.row(p));
            }
            log_weights.fill(0.0);
            resample_count += 1;

            // Move step: independent Gibbs refreshes per particle, each on
            // its own (seed, particle, epoch) stream.
            let seed = cfg.seed;
            let sweeps = cfg.sweeps_per_move;
            let active_ref = &active;
            let sampler_ref = &sampler;
            let moved: Vec<Array1<f64>> = (0..r_count)
                .into_par_iter()
                .map(|r| {
                    let mut z = particles.row(r).to_owned();
                    let mut prng =
                        stream_rng(seed, move_epoch * r_count as u64 + r as u64);
                    for _ in 0..sweeps {
                        sampler_ref.sweep(&mut z, y, active_ref, &mut prng);
                    }
                    z
                })
                .collect();
            for (r, z) in moved.into_iter().enumerate() {
                particles.row_mut(r).assign(&z);
            }
            move_epoch += 1;

            // Every surviving particle must satisfy every active constraint.
            for r in 0..r_count {
                for (site_idx, &is_active) in active.iter().enumerate() {
                    if is_active && y[site_idx] * particles[[r, site_idx]] < 0.0 {
                        return Err(Error::Internal(format!(
                            "particle {r} violates active constraint {site_idx} after move"
                        )));
                    }
                }
            }
        }
    }

    let diagnostics = RmDiagnostics {
        ess_trace,
        resample_count,
        constraint_order: order,
        final_system: ParticleSystem {
            particles,
            log_weights,
            constraints_active: n,
            log_z_partial: log_z,
        },
    };
    Ok((log_z, diagnostics))
}
