//! Benchmark configuration: TOML on disk, fully defaulted, validated before
//! any run starts. The canonical JSON serialisation of the resolved config
//! is hashed into `config_digest` so records can be traced back to their
//! exact settings.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use gpc_core::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    pub lengthscale: f64,
    pub amplitude: f64,
    /// Diagonal jitter; `None` resolves to `1e-8 * amplitude^2`.
    pub jitter: Option<f64>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            lengthscale: 1.0,
            amplitude: 1.0,
            jitter: None,
        }
    }
}

impl KernelConfig {
    pub fn spec(&self) -> Result<gpc_core::KernelSpec> {
        match self.jitter {
            Some(j) => gpc_core::KernelSpec::new(self.lengthscale, self.amplitude, j),
            None => gpc_core::KernelSpec::with_default_jitter(self.lengthscale, self.amplitude),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub n: usize,
    pub dim: usize,
    /// Distance between the two cluster centres.
    pub separation: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n: 40,
            dim: 2,
            separation: 2.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// CSV file of `f1,...,fD,label` rows; takes precedence over the
    /// synthetic generator when set.
    pub path: Option<String>,
    pub synthetic: Option<SyntheticConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpMethodConfig {
    pub enabled: bool,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for EpMethodConfig {
    fn default() -> Self {
        EpMethodConfig {
            enabled: true,
            tol: 1e-6,
            max_sweeps: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AisHmcConfig {
    pub enabled: bool,
    pub b: usize,
    pub runs: usize,
    pub beta_min: f64,
    pub epsilon: f64,
    pub l_max: usize,
}

impl Default for AisHmcConfig {
    fn default() -> Self {
        AisHmcConfig {
            enabled: false,
            b: 100,
            runs: 100,
            beta_min: 1e-4,
            epsilon: 0.02,
            l_max: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AisRmhmcConfig {
    pub enabled: bool,
    pub b: usize,
    pub runs: usize,
    pub beta_min: f64,
    pub epsilon: f64,
    pub l_max: usize,
    pub f_max: usize,
}

impl Default for AisRmhmcConfig {
    fn default() -> Self {
        AisRmhmcConfig {
            enabled: false,
            b: 100,
            runs: 100,
            beta_min: 1e-4,
            epsilon: 0.1,
            l_max: 10,
            f_max: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RmMethodConfig {
    pub enabled: bool,
    pub r_particles: usize,
    pub resample_threshold: f64,
    pub sweeps_per_move: usize,
    pub permute_constraints: bool,
}

impl Default for RmMethodConfig {
    fn default() -> Self {
        RmMethodConfig {
            enabled: false,
            r_particles: 1000,
            resample_threshold: 0.9,
            sweeps_per_move: 2,
            permute_constraints: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct MethodsConfig {
    pub ep: EpMethodConfig,
    pub ais_hmc_prior: AisHmcConfig,
    pub ais_hmc_q: AisHmcConfig,
    pub ais_rmhmc_prior: AisRmhmcConfig,
    pub ais_rmhmc_q: AisRmhmcConfig,
    pub rm: RmMethodConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub repetitions: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { repetitions: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub kernel: KernelConfig,
    pub data: DataConfig,
    pub methods: MethodsConfig,
    pub run: RunConfig,
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: BenchConfig = toml::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.spec()?;
        if self.data.path.is_none() && self.data.synthetic.is_none() {
            return Err(Error::InvalidInput(
                "config needs either data.path or a [data.synthetic] section".into(),
            ));
        }
        if let Some(s) = &self.data.synthetic {
            if s.n < 1 || s.dim < 1 {
                return Err(Error::InvalidInput(
                    "synthetic data needs n >= 1 and dim >= 1".into(),
                ));
            }
        }
        if self.run.repetitions == 0 {
            return Err(Error::InvalidInput("repetitions must be at least 1".into()));
        }
        for (tag, b, runs) in [
            ("ais_hmc_prior", self.methods.ais_hmc_prior.b, self.methods.ais_hmc_prior.runs),
            ("ais_hmc_q", self.methods.ais_hmc_q.b, self.methods.ais_hmc_q.runs),
            (
                "ais_rmhmc_prior",
                self.methods.ais_rmhmc_prior.b,
                self.methods.ais_rmhmc_prior.runs,
            ),
            ("ais_rmhmc_q", self.methods.ais_rmhmc_q.b, self.methods.ais_rmhmc_q.runs),
        ] {
            if b < 2 || runs == 0 {
                return Err(Error::InvalidInput(format!(
                    "{tag}: b must be >= 2 and runs >= 1"
                )));
            }
        }
        if self.methods.rm.r_particles < 2 {
            return Err(Error::InvalidInput("rm.r_particles must be >= 2".into()));
        }
        Ok(())
    }

    /// Stable hex digest of the canonical JSON form.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serialises");
        let hash = Sha256::digest(&canonical);
        hex::encode(&hash[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable_and_sensitive() {
        let mut a = BenchConfig::default();
        a.data.synthetic = Some(SyntheticConfig::default());
        let b = a.clone();
        assert_eq!(a.digest(), b.digest());
        a.kernel.lengthscale = 2.0;
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn parses_minimal_toml() {
        let cfg = BenchConfig::from_toml(
            r#"
            [data.synthetic]
            n = 10
            [methods.rm]
            enabled = true
            r_particles = 100
            "#,
        )
        .unwrap();
        assert!(cfg.methods.rm.enabled);
        assert_eq!(cfg.data.synthetic.unwrap().n, 10);
    }

    #[test]
    fn rejects_missing_data_and_unknown_keys() {
        assert!(BenchConfig::from_toml("").is_err());
        assert!(BenchConfig::from_toml("[data]\nbogus = 1").is_err());
    }
}
