//! Experiment configuration: DGP and estimator specifications, basis parsing,
//! and the JSON document format consumed by the `experiment` subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use riesz_core::{
    generate_ate_dgp, generate_shift_dgp, AteDgpConfig, Dataset, FeatureBuilder, FunctionalSpec,
    Result, RieszError, ShiftDgpConfig,
};

fn default_clip() -> f64 {
    0.05
}

fn default_noise_sd() -> f64 {
    1.0
}

fn default_hidden() -> Vec<usize> {
    vec![32, 32]
}

fn default_lr() -> f64 {
    1e-2
}

fn default_epochs() -> usize {
    2000
}

/// Data-generating process, minus the sample size and seed, which the runner
/// supplies per cell (`n` from `sample_sizes`, seed = master_seed + r).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DgpSpec {
    Ate {
        p: usize,
        tau: f64,
        propensity_coefs: Vec<f64>,
        #[serde(default = "default_clip")]
        propensity_clip: f64,
        outcome_coefs: Vec<f64>,
        #[serde(default = "default_noise_sd")]
        noise_sd: f64,
    },
    Shift {
        mean_shift: f64,
        /// Target sample size; defaults to the cell's source size.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_target: Option<usize>,
    },
}

impl DgpSpec {
    pub fn functional(&self) -> FunctionalSpec {
        match self {
            DgpSpec::Ate { .. } => FunctionalSpec::AteDifference,
            DgpSpec::Shift { .. } => FunctionalSpec::ShiftMean,
        }
    }

    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        match self {
            DgpSpec::Ate {
                p,
                tau,
                propensity_coefs,
                propensity_clip,
                outcome_coefs,
                noise_sd,
            } => generate_ate_dgp(&AteDgpConfig {
                n,
                p: *p,
                tau: *tau,
                propensity_coefs: propensity_coefs.clone(),
                propensity_clip: *propensity_clip,
                outcome_coefs: outcome_coefs.clone(),
                noise_sd: *noise_sd,
                seed,
            }),
            DgpSpec::Shift {
                mean_shift,
                n_target,
            } => generate_shift_dgp(&ShiftDgpConfig {
                n_source: n,
                n_target: n_target.unwrap_or(n),
                mean_shift: *mean_shift,
                seed,
            }),
        }
    }
}

/// One estimator to run, with its hyperparameters. The `name` tag doubles as
/// the `--estimator` value and the `estimator` column in results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum EstimatorSpec {
    RieszLoss {
        #[serde(default)]
        l2: f64,
    },
    Rayleigh {
        #[serde(default)]
        l2: f64,
    },
    Lasso {
        l1: f64,
    },
    RayleighL1 {
        l1: f64,
    },
    NnRiesz {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default = "default_lr")]
        lr: f64,
        #[serde(default = "default_epochs")]
        epochs: usize,
    },
    NnRayleigh {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default = "default_lr")]
        lr: f64,
        #[serde(default = "default_epochs")]
        epochs: usize,
    },
}

impl EstimatorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorSpec::RieszLoss { .. } => "riesz-loss",
            EstimatorSpec::Rayleigh { .. } => "rayleigh",
            EstimatorSpec::Lasso { .. } => "lasso",
            EstimatorSpec::RayleighL1 { .. } => "rayleigh-l1",
            EstimatorSpec::NnRiesz { .. } => "nn-riesz",
            EstimatorSpec::NnRayleigh { .. } => "nn-rayleigh",
        }
    }
}

/// The experiment document: a DGP, a basis, estimators, and the Monte Carlo
/// grid. Replication `r` uses seed `master_seed + r`, so any replication's
/// results are independent of how many others run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dgp: DgpSpec,
    pub basis: String,
    pub estimators: Vec<EstimatorSpec>,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub master_seed: u64,
    pub output_path: PathBuf,
    /// Z-score the sieve columns before the linear fits.
    #[serde(default)]
    pub standardize: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(RieszError::Config("replications must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(RieszError::Config("estimator list must be nonempty".into()));
        }
        if self.sample_sizes.is_empty() {
            return Err(RieszError::Config("sample_sizes must be nonempty".into()));
        }
        parse_basis(&self.basis)?;
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&raw)
            .map_err(|e| RieszError::Config(format!("could not parse {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parse a basis flag: `poly-t:K`, `poly:K`, or `rff:COUNT,BANDWIDTH[,SEED]`.
pub fn parse_basis(spec: &str) -> Result<FeatureBuilder> {
    let bad = |msg: &str| RieszError::Config(format!("basis `{spec}`: {msg}"));
    let (kind, args) = spec
        .split_once(':')
        .ok_or_else(|| bad("expected poly-t:K, poly:K, or rff:COUNT,BW[,SEED]"))?;
    match kind {
        "poly-t" => {
            let degree = args.parse().map_err(|_| bad("degree must be an integer"))?;
            Ok(FeatureBuilder::PolynomialWithTreatment { degree })
        }
        "poly" => {
            let degree = args.parse().map_err(|_| bad("degree must be an integer"))?;
            Ok(FeatureBuilder::Polynomial { degree })
        }
        "rff" => {
            let parts: Vec<&str> = args.split(',').collect();
            if parts.len() < 2 || parts.len() > 3 {
                return Err(bad("expected rff:COUNT,BANDWIDTH[,SEED]"));
            }
            let count = parts[0].parse().map_err(|_| bad("count must be an integer"))?;
            let bandwidth = parts[1].parse().map_err(|_| bad("bandwidth must be a number"))?;
            let seed = if parts.len() == 3 {
                parts[2].parse().map_err(|_| bad("seed must be an integer"))?
            } else {
                0
            };
            Ok(FeatureBuilder::RandomFourier {
                count,
                bandwidth,
                seed,
            })
        }
        other => Err(bad(&format!("unknown basis kind `{other}`"))),
    }
}
