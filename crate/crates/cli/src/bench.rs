//! Benchmark runner: executes the enabled estimators against one dataset,
//! timing each run, and emits machine-readable records.

use std::fmt::Write as _;
use std::time::Instant;

use ndarray::{Array1, Array2};
use serde::Serialize;

use gpc_core::ais::{ais_estimate, AisConfig, TransitionKernel};
use gpc_core::ep::{ep_fit, ep_reference, EpApprox};
use gpc_core::mcmc::{HmcConfig, RmhmcConfig};
use gpc_core::smc::{rm_estimate, RmConfig};
use gpc_core::target::TemperedTarget;
use gpc_core::{build_kernel, Result, SpdMatrix};

use crate::config::BenchConfig;

/// Closed registry of method tags, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Ep,
    AisHmcPrior,
    AisHmcQ,
    AisRmhmcPrior,
    AisRmhmcQ,
    Rm,
}

pub const ALL_METHODS: [Method; 6] = [
    Method::Ep,
    Method::AisHmcPrior,
    Method::AisHmcQ,
    Method::AisRmhmcPrior,
    Method::AisRmhmcQ,
    Method::Rm,
];

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Ep => "ep",
            Method::AisHmcPrior => "ais-hmc-prior",
            Method::AisHmcQ => "ais-hmc-q",
            Method::AisRmhmcPrior => "ais-rmhmc-prior",
            Method::AisRmhmcQ => "ais-rmhmc-q",
            Method::Rm => "rm",
        }
    }

    fn needs_reference(self) -> bool {
        matches!(self, Method::AisHmcQ | Method::AisRmhmcQ)
    }
}

/// One benchmark run: the fixed CSV columns plus the error detail carried in
/// the JSON stream.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub method: String,
    pub seed: u64,
    pub n_data: usize,
    pub wall_time_s: f64,
    pub log_z: f64,
    pub config_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub const CSV_HEADER: &str = "method,seed,n_data,wall_time_s,log_z,config_digest";

impl RunRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.method, self.seed, self.n_data, self.wall_time_s, self.log_z, self.config_digest
        )
    }
}

/// Splitmix-style seed derivation: one master seed fans out to one
/// independent seed per (method, repetition).
pub fn derive_seed(master: u64, method_idx: u64, repetition: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(method_idx + 1))
        .wrapping_add(0xBF58_476D_1CE4_E5B9u64.wrapping_mul(repetition + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub struct BenchOutcome {
    pub records: Vec<RunRecord>,
    pub jsonl: String,
    pub csv: String,
    pub summary: String,
    pub failures: usize,
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> (Result<T>, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

struct Problem {
    k: SpdMatrix,
    y: Array1<f64>,
    ep: Option<EpApprox>,
}

fn run_method(
    method: Method,
    cfg: &BenchConfig,
    problem: &Problem,
    seed: u64,
) -> (Result<f64>, f64) {
    let k = &problem.k;
    let y = &problem.y;
    match method {
        Method::Ep => unreachable!("EP handled by the caller"),
        Method::Rm => {
            let m = &cfg.methods.rm;
            let rm_cfg = RmConfig {
                r_particles: m.r_particles,
                resample_threshold: m.resample_threshold,
                sweeps_per_move: m.sweeps_per_move,
                seed,
                permute_constraints: m.permute_constraints,
            };
            timed(|| rm_estimate(y, k, &rm_cfg).map(|(z, _)| z))
        }
        _ => {
            let (b, runs, beta_min, kernel) = match method {
                Method::AisHmcPrior => {
                    let m = &cfg.methods.ais_hmc_prior;
                    (
                        m.b,
                        m.runs,
                        m.beta_min,
                        TransitionKernel::Hmc(HmcConfig::unit_mass(m.epsilon, m.l_max, y.len())),
                    )
                }
                Method::AisHmcQ => {
                    let m = &cfg.methods.ais_hmc_q;
                    (
                        m.b,
                        m.runs,
                        m.beta_min,
                        TransitionKernel::Hmc(HmcConfig::unit_mass(m.epsilon, m.l_max, y.len())),
                    )
                }
                Method::AisRmhmcPrior => {
                    let m = &cfg.methods.ais_rmhmc_prior;
                    (
                        m.b,
                        m.runs,
                        m.beta_min,
                        TransitionKernel::Rmhmc(RmhmcConfig {
                            epsilon: m.epsilon,
                            l_max: m.l_max,
                            f_max: m.f_max,
                        }),
                    )
                }
                Method::AisRmhmcQ => {
                    let m = &cfg.methods.ais_rmhmc_q;
                    (
                        m.b,
                        m.runs,
                        m.beta_min,
                        TransitionKernel::Rmhmc(RmhmcConfig {
                            epsilon: m.epsilon,
                            l_max: m.l_max,
                            f_max: m.f_max,
                        }),
                    )
                }
                _ => unreachable!(),
            };
            let ais_cfg = AisConfig {
                b_count: b,
                beta_min,
                runs,
                kernel,
            };
            let target = if method.needs_reference() {
                let Some(fit) = &problem.ep else {
                    return (
                        Err(gpc_core::Error::InvalidInput(
                            "annealing from q requires an EP fit; enable the ep method".into(),
                        )),
                        0.0,
                    );
                };
                match ep_reference(fit, k)
                    .and_then(|r| TemperedTarget::gaussian_reference(y.clone(), k.clone(), r, 1.0))
                {
                    Ok(t) => t,
                    Err(e) => return (Err(e), 0.0),
                }
            } else {
                match TemperedTarget::prior_reference(y.clone(), k.clone(), 1.0) {
                    Ok(t) => t,
                    Err(e) => return (Err(e), 0.0),
                }
            };
            timed(|| ais_estimate(&target, &ais_cfg, seed).map(|r| r.log_z))
        }
    }
}

/// Runs every enabled method for every repetition against the dataset.
/// Method failures become NaN records; the bench keeps going.
pub fn run_bench(
    cfg: &BenchConfig,
    inputs: &Array2<f64>,
    labels: &Array1<f64>,
    master_seed: u64,
    no_timing: bool,
) -> Result<BenchOutcome> {
    let digest = cfg.digest();
    let spec = cfg.kernel.spec()?;
    let k = build_kernel(inputs.view(), &spec)?;
    let n_data = labels.len();

    let mut records: Vec<RunRecord> = Vec::new();
    let mut failures = 0usize;

    // EP is fitted once per dataset: it is deterministic, it is its own
    // estimator, and the q-annealed methods share it.
    let needs_ep = cfg.methods.ep.enabled
        || cfg.methods.ais_hmc_q.enabled
        || cfg.methods.ais_rmhmc_q.enabled;
    let mut problem = Problem {
        k,
        y: labels.clone(),
        ep: None,
    };
    if needs_ep {
        let (fit, secs) = timed(|| ep_fit(&problem.y, &problem.k, cfg.methods.ep.tol, cfg.methods.ep.max_sweeps));
        match fit {
            Ok(fit) => {
                if !fit.converged {
                    eprintln!(
                        "warning: EP did not converge within {} sweeps",
                        cfg.methods.ep.max_sweeps
                    );
                }
                if cfg.methods.ep.enabled {
                    records.push(RunRecord {
                        method: Method::Ep.tag().into(),
                        seed: master_seed,
                        n_data,
                        wall_time_s: if no_timing { 0.0 } else { secs },
                        log_z: fit.log_z_ep,
                        config_digest: digest.clone(),
                        error: None,
                    });
                }
                problem.ep = Some(fit);
            }
            Err(e) => {
                failures += 1;
                eprintln!("error: ep: {e}");
                if cfg.methods.ep.enabled {
                    records.push(RunRecord {
                        method: Method::Ep.tag().into(),
                        seed: master_seed,
                        n_data,
                        wall_time_s: if no_timing { 0.0 } else { 0.0 },
                        log_z: f64::NAN,
                        config_digest: digest.clone(),
                        error: Some(e.to_string()),
                    });
                }
            }
        }
    }

    for (method_idx, method) in ALL_METHODS.iter().enumerate() {
        let enabled = match method {
            Method::Ep => false, // already handled
            Method::AisHmcPrior => cfg.methods.ais_hmc_prior.enabled,
            Method::AisHmcQ => cfg.methods.ais_hmc_q.enabled,
            Method::AisRmhmcPrior => cfg.methods.ais_rmhmc_prior.enabled,
            Method::AisRmhmcQ => cfg.methods.ais_rmhmc_q.enabled,
            Method::Rm => cfg.methods.rm.enabled,
        };
        if !enabled {
            continue;
        }
        for rep in 0..cfg.run.repetitions {
            let seed = derive_seed(master_seed, method_idx as u64, rep as u64);
            let (outcome, secs) = run_method(*method, cfg, &problem, seed);
            let (log_z, error) = match outcome {
                Ok(z) => (z, None),
                Err(e) => {
                    failures += 1;
                    eprintln!("error: {}: {e}", method.tag());
                    (f64::NAN, Some(e.to_string()))
                }
            };
            records.push(RunRecord {
                method: method.tag().into(),
                seed,
                n_data,
                wall_time_s: if no_timing { 0.0 } else { secs },
                log_z,
                config_digest: digest.clone(),
                error,
            });
        }
    }

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    let mut jsonl = String::new();
    for rec in &records {
        csv.push_str(&rec.csv_line());
        csv.push('\n');
        #[derive(Serialize)]
        struct JsonRecord<'a> {
            #[serde(flatten)]
            rec: &'a RunRecord,
            config: &'a BenchConfig,
        }
        let line = serde_json::to_string(&JsonRecord { rec, config: cfg })
            .expect("record serialises");
        jsonl.push_str(&line);
        jsonl.push('\n');
    }

    let summary = summarize(&records, problem.ep.as_ref().map(|f| f.log_z_ep));
    Ok(BenchOutcome {
        records,
        jsonl,
        csv,
        summary,
        failures,
    })
}

/// Per-method mean/std of log Z, mean wall time, and the deviation from
/// EP's estimate when available.
fn summarize(records: &[RunRecord], ep_log_z: Option<f64>) -> String {
    let mut out = String::from("method,runs,mean_log_z,std_log_z,mean_wall_time_s,dev_from_ep\n");
    for method in ALL_METHODS {
        let vals: Vec<&RunRecord> = records
            .iter()
            .filter(|r| r.method == method.tag())
            .collect();
        if vals.is_empty() {
            continue;
        }
        let finite: Vec<f64> = vals
            .iter()
            .map(|r| r.log_z)
            .filter(|z| z.is_finite())
            .collect();
        let mean = if finite.is_empty() {
            f64::NAN
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        let std = if finite.len() > 1 {
            (finite.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>()
                / (finite.len() - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        let wall = vals.iter().map(|r| r.wall_time_s).sum::<f64>() / vals.len() as f64;
        let dev = ep_log_z.map(|e| mean - e).unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            method.tag(),
            vals.len(),
            mean,
            std,
            wall,
            dev
        );
    }
    out
}
