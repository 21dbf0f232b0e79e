use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::barycenter::{CombineMethod, FixedPointConfig};
use crate::error::{Error, Result};
use crate::glm::{Family, DEFAULT_DISPERSION_SCALE, DEFAULT_PRIOR_VARIANCE};
use crate::samplers::ChainConfig;

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "WASP_GLM_OUTPUT_DIR";

/// Full description of a simulation study.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub family: Family,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub workers: usize,
    /// Chain settings; `chain.seed` is the base seed of the whole run.
    pub chain: ChainConfig,
    pub replications: usize,
    pub output_dir: PathBuf,
    pub combine_methods: Vec<CombineMethod>,
    /// Read data from this CSV instead of simulating it.
    pub data: Option<PathBuf>,
    pub trials: u32,
    pub sigma: f64,
    pub categories: usize,
    pub prior_variance: f64,
    pub dispersion_scale: f64,
    pub fixed_point: FixedPointConfig,
    pub save_draws: bool,
    /// Combine whatever subsets succeeded instead of failing the replication.
    pub allow_partial: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            family: Family::LogisticBinomial,
            n: 10_000,
            p: 10,
            k: 20,
            workers: 1,
            chain: ChainConfig::default(),
            replications: 10,
            output_dir: PathBuf::from("wasp-output"),
            combine_methods: vec![CombineMethod::Wasp, CombineMethod::Dpmc],
            data: None,
            trials: 15,
            sigma: 1.0,
            categories: 3,
            prior_variance: DEFAULT_PRIOR_VARIANCE,
            dispersion_scale: DEFAULT_DISPERSION_SCALE,
            fixed_point: FixedPointConfig::default(),
            save_draws: true,
            allow_partial: false,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    family: Option<String>,
    n: Option<usize>,
    p: Option<usize>,
    k: Option<usize>,
    workers: Option<usize>,
    seed: Option<u64>,
    replications: Option<usize>,
    output_dir: Option<PathBuf>,
    combine_methods: Option<Vec<String>>,
    data: Option<PathBuf>,
    save_draws: Option<bool>,
    allow_partial: Option<bool>,
    #[serde(default)]
    chain: RawChain,
    #[serde(default)]
    simulation: RawSimulation,
    #[serde(default)]
    prior: RawPrior,
    #[serde(default)]
    barycenter: RawBarycenter,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChain {
    total_iters: Option<usize>,
    burn_in: Option<usize>,
    thin: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    trials: Option<u32>,
    sigma: Option<f64>,
    categories: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrior {
    variance: Option<f64>,
    dispersion_scale: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBarycenter {
    tol: Option<f64>,
    max_iter: Option<usize>,
    clamp_tol: Option<f64>,
}

impl ExperimentConfig {
    /// Parses TOML text; absent keys keep their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut cfg = ExperimentConfig::default();
        if let Some(f) = raw.family {
            cfg.family = f.parse()?;
        }
        macro_rules! take {
            ($($src:expr => $dst:expr),* $(,)?) => {
                $(if let Some(v) = $src { $dst = v; })*
            };
        }
        take! {
            raw.n => cfg.n,
            raw.p => cfg.p,
            raw.k => cfg.k,
            raw.workers => cfg.workers,
            raw.seed => cfg.chain.seed,
            raw.replications => cfg.replications,
            raw.output_dir => cfg.output_dir,
            raw.save_draws => cfg.save_draws,
            raw.allow_partial => cfg.allow_partial,
            raw.chain.total_iters => cfg.chain.total_iters,
            raw.chain.burn_in => cfg.chain.burn_in,
            raw.chain.thin => cfg.chain.thin,
            raw.simulation.trials => cfg.trials,
            raw.simulation.sigma => cfg.sigma,
            raw.simulation.categories => cfg.categories,
            raw.prior.variance => cfg.prior_variance,
            raw.prior.dispersion_scale => cfg.dispersion_scale,
            raw.barycenter.tol => cfg.fixed_point.tol,
            raw.barycenter.max_iter => cfg.fixed_point.max_iter,
            raw.barycenter.clamp_tol => cfg.fixed_point.clamp_tol,
        }
        cfg.data = raw.data;
        if let Some(methods) = raw.combine_methods {
            cfg.combine_methods = methods.iter().map(|m| m.parse()).collect::<Result<_>>()?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Applies the output-directory environment override, if set.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                self.output_dir = PathBuf::from(dir);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.replications == 0 {
            return bad("replications must be >= 1".into());
        }
        if self.k == 0 {
            return bad("k must be >= 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be >= 1".into());
        }
        if self.combine_methods.is_empty() {
            return bad("combine_methods must not be empty".into());
        }
        if self.data.is_none() {
            if self.n == 0 || self.p == 0 {
                return bad(format!(
                    "n and p must be >= 1 (got n={}, p={})",
                    self.n, self.p
                ));
            }
            if self.k > self.n {
                return bad(format!("k={} exceeds n={}", self.k, self.n));
            }
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if !(self.sigma > 0.0) {
            return bad(format!("sigma must be > 0, got {}", self.sigma));
        }
        if self.categories < 2 {
            return bad("categories must be >= 2".into());
        }
        if !(self.prior_variance > 0.0) || !(self.dispersion_scale > 0.0) {
            return bad("prior variance and dispersion scale must be > 0".into());
        }
        self.fixed_point.validate()?;
        self.chain
            .validate()
            .map_err(|e| Error::Config(format!("chain: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_protocol() {
        let c = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(c.replications, 10);
        assert_eq!(c.chain.retained(), 1000);
        assert_eq!(
            c.combine_methods,
            vec![CombineMethod::Wasp, CombineMethod::Dpmc]
        );
        c.validate().unwrap();
    }

    #[test]
    fn sections_and_top_level_keys() {
        let c = ExperimentConfig::from_toml_str(
            r#"
            family = "negbin"
            n = 500
            p = 3
            k = 5
            seed = 42
            combine_methods = ["wasp"]

            [chain]
            total_iters = 2000
            burn_in = 1000
            thin = 2

            [prior]
            variance = 10.0
            "#,
        )
        .unwrap();
        assert_eq!(c.family, Family::NegativeBinomial);
        assert_eq!(c.chain, ChainConfig::new(2000, 1000, 2, 42).unwrap());
        assert_eq!(c.prior_variance, 10.0);
        assert_eq!(c.combine_methods, vec![CombineMethod::Wasp]);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            ExperimentConfig::from_toml_str("colour = 1"),
            Err(Error::Config(_))
        ));
        assert!(ExperimentConfig::from_toml_str("family = \"poisson\"").is_err());
        let c = ExperimentConfig::from_toml_str("replications = 0").unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::from_toml_str("combine_methods = []").unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::from_toml_str("n = 5\nk = 6").unwrap();
        assert!(c.validate().is_err());
    }
}
