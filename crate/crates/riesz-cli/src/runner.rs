//! The experiment runner: replicated fits across estimators and sample
//! sizes, metric rows, and the results CSV.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use riesz_core::functional::basis_moments;
use riesz_core::neural::{Activation, MlpConfig, TrainConfig};
use riesz_core::sieve::standardize_features;
use riesz_core::{
    build_features, equivalence_report, fit_outcome_model, gram, plug_in_estimates, predict_alpha,
    solve_lasso, solve_rayleigh, solve_riesz_loss, train_rayleigh_constrained, train_riesz_loss,
    Dataset, FeatureBuilder, FeatureMatrix, FunctionalSpec, GramMatrix, LinearRieszFit,
    MomentVector, NeuralRieszFit, Result, RieszError,
};

use crate::config::{EstimatorSpec, ExperimentConfig};

/// Design matrix, Gram matrix and moment vector for one dataset, with the
/// optional column standardization already threaded through both sides.
pub struct SievePipeline {
    pub features: FeatureMatrix,
    pub gram: GramMatrix,
    pub moments: MomentVector,
    pub scaling: Option<riesz_core::FeatureScaling>,
}

impl SievePipeline {
    pub fn build(
        data: &Dataset,
        functional: &FunctionalSpec,
        builder: &FeatureBuilder,
        standardize: bool,
    ) -> Result<Self> {
        let features = build_features(data, builder)?;
        let raw_moments = basis_moments(data, functional, builder)?;
        if standardize {
            let (std_features, scaling) = standardize_features(&features);
            let values =
                scaling.apply_to_moments(&raw_moments.values, functional.constant_moment());
            let moments = MomentVector {
                values,
                sample_size: raw_moments.sample_size,
            };
            Ok(Self {
                gram: gram(&std_features),
                features,
                moments,
                scaling: Some(scaling),
            })
        } else {
            Ok(Self {
                gram: gram(&features),
                features,
                moments: raw_moments,
                scaling: None,
            })
        }
    }
}

/// A fit from either family, as serialized by the `fit` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum AnyFit {
    Linear(LinearRieszFit),
    Neural(NeuralRieszFit),
}

impl AnyFit {
    pub fn objective_value(&self) -> f64 {
        match self {
            AnyFit::Linear(f) => f.objective_value,
            AnyFit::Neural(f) => f.final_objective,
        }
    }

    /// Representer predictions on a dataset (its model inputs / features).
    pub fn predict(&self, data: &Dataset, builder: &FeatureBuilder) -> Result<Array1<f64>> {
        match self {
            AnyFit::Linear(f) => f.predict(&build_features(data, builder)?),
            AnyFit::Neural(f) => predict_alpha(f, data),
        }
    }
}

/// Fit one estimator on a prepared dataset. `seed` seeds the network
/// initialization for the neural estimators.
pub fn fit_estimator(
    spec: &EstimatorSpec,
    data: &Dataset,
    functional: &FunctionalSpec,
    pipeline: &SievePipeline,
    seed: u64,
) -> Result<AnyFit> {
    let attach_scaling = |fit: LinearRieszFit| match &pipeline.scaling {
        Some(s) => fit.with_scaling(s.clone()),
        None => fit,
    };
    match spec {
        EstimatorSpec::RieszLoss { l2 } => {
            let fit = solve_riesz_loss(&pipeline.gram, &pipeline.moments, *l2)?;
            Ok(AnyFit::Linear(attach_scaling(fit)))
        }
        EstimatorSpec::Rayleigh { l2 } => {
            // An l2 penalty enlarges the constraint ellipsoid's quadratic
            // form, so the penalized problem is the plain one on G + l2 I.
            let fit = if *l2 > 0.0 {
                let mut fit = solve_rayleigh(&pipeline.gram.ridged(*l2), &pipeline.moments, 0.0)?;
                fit.l2_penalty = *l2;
                fit
            } else {
                solve_rayleigh(&pipeline.gram, &pipeline.moments, 0.0)?
            };
            Ok(AnyFit::Linear(attach_scaling(fit)))
        }
        EstimatorSpec::Lasso { l1 } => {
            let fit = solve_lasso(&pipeline.gram, &pipeline.moments, *l1)?;
            Ok(AnyFit::Linear(attach_scaling(fit)))
        }
        EstimatorSpec::RayleighL1 { l1 } => {
            let fit = solve_rayleigh(&pipeline.gram, &pipeline.moments, *l1)?;
            Ok(AnyFit::Linear(attach_scaling(fit)))
        }
        EstimatorSpec::NnRiesz { hidden, lr, epochs } => {
            let (mlp, train) = network_configs(data, hidden, *lr, *epochs, seed);
            Ok(AnyFit::Neural(train_riesz_loss(
                data, functional, &mlp, &train,
            )?))
        }
        EstimatorSpec::NnRayleigh { hidden, lr, epochs } => {
            let (mlp, train) = network_configs(data, hidden, *lr, *epochs, seed);
            Ok(AnyFit::Neural(train_rayleigh_constrained(
                data, functional, &mlp, &train,
            )?))
        }
    }
}

fn network_configs(
    data: &Dataset,
    hidden: &[usize],
    lr: f64,
    epochs: usize,
    seed: u64,
) -> (MlpConfig, TrainConfig) {
    (
        MlpConfig {
            input_dim: data.input_dim(),
            hidden_widths: hidden.to_vec(),
            activation: Activation::Tanh,
            init_seed: seed,
        },
        TrainConfig {
            learning_rate: lr,
            max_epochs: epochs,
            ..TrainConfig::default()
        },
    )
}

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub estimator: String,
    pub n: usize,
    pub replication: usize,
    pub rr_mse: Option<f64>,
    pub weighting_estimate: Option<f64>,
    pub dr_estimate: Option<f64>,
    pub objective_value: Option<f64>,
    pub equivalence_max_rel_diff: Option<f64>,
    pub runtime_ms: f64,
    pub error: Option<String>,
}

const RESULT_HEADER: [&str; 10] = [
    "estimator",
    "n",
    "replication",
    "rr_mse",
    "weighting_estimate",
    "dr_estimate",
    "objective_value",
    "equivalence_max_rel_diff",
    "runtime_ms",
    "error",
];

/// Run the full grid: for each sample size and replication, generate the
/// dataset (seed = master_seed + replication), build the sieve once, fit
/// every estimator, and evaluate. Estimator failures become rows with the
/// error recorded; the run continues. Rows are ordered by (n, estimator
/// position, replication), written to `output_path`, and returned.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let builder = crate::config::parse_basis(&cfg.basis)?;
    let functional = cfg.dgp.functional();

    // (n index, estimator index, replication) -> row, for deterministic order.
    let mut keyed: Vec<((usize, usize, usize), ResultRow)> = Vec::new();

    for (n_idx, &n) in cfg.sample_sizes.iter().enumerate() {
        for r in 0..cfg.replications {
            let seed = cfg.master_seed + r as u64;
            let data = cfg.dgp.generate(n, seed)?;
            let pipeline = SievePipeline::build(&data, &functional, &builder, cfg.standardize)?;
            let h_fit = fit_outcome_model(&data, &pipeline.features, 0.0).ok();

            let mut linear_thetas: Vec<Option<LinearRieszFit>> =
                vec![None; cfg.estimators.len()];
            let mut cell_rows: Vec<usize> = Vec::new();

            for (e_idx, est) in cfg.estimators.iter().enumerate() {
                let started = Instant::now();
                let fitted = fit_estimator(est, &data, &functional, &pipeline, seed);
                let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
                let row = match fitted {
                    Ok(fit) => {
                        if let AnyFit::Linear(linear) = &fit {
                            linear_thetas[e_idx] = Some(linear.clone());
                        }
                        let alpha = fit.predict(&data, &builder)?;
                        let metrics = plug_in_estimates(
                            &data,
                            &functional,
                            &alpha,
                            h_fit.as_ref(),
                            &pipeline.features,
                            &builder,
                        )?;
                        ResultRow {
                            estimator: est.name().to_string(),
                            n,
                            replication: r,
                            rr_mse: metrics.rr_mse,
                            weighting_estimate: Some(metrics.weighting_estimate),
                            dr_estimate: metrics.dr_estimate,
                            objective_value: Some(fit.objective_value()),
                            equivalence_max_rel_diff: None,
                            runtime_ms,
                            error: None,
                        }
                    }
                    Err(err) => ResultRow {
                        estimator: est.name().to_string(),
                        n,
                        replication: r,
                        rr_mse: None,
                        weighting_estimate: None,
                        dr_estimate: None,
                        objective_value: None,
                        equivalence_max_rel_diff: None,
                        runtime_ms,
                        error: Some(err.to_string()),
                    },
                };
                cell_rows.push(keyed.len());
                keyed.push(((n_idx, e_idx, r), row));
            }

            // When the cell ran both closed-form estimators at equal
            // penalties, record how far apart they landed.
            if let Some(diff) = cell_equivalence(&cfg.estimators, &linear_thetas)? {
                for &k in &cell_rows {
                    let name = keyed[k].1.estimator.as_str();
                    if name == "riesz-loss" || name == "rayleigh" {
                        keyed[k].1.equivalence_max_rel_diff = Some(diff);
                    }
                }
            }
        }
    }

    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    let rows: Vec<ResultRow> = keyed.into_iter().map(|(_, row)| row).collect();
    write_results(&rows, &cfg.output_path)?;
    Ok(rows)
}

fn cell_equivalence(
    estimators: &[EstimatorSpec],
    fits: &[Option<LinearRieszFit>],
) -> Result<Option<f64>> {
    let mut loss_fit = None;
    let mut rayleigh_fit = None;
    for (est, fit) in estimators.iter().zip(fits) {
        match (est, fit) {
            (EstimatorSpec::RieszLoss { l2 }, Some(f)) if loss_fit.is_none() => {
                loss_fit = Some((*l2, f));
            }
            (EstimatorSpec::Rayleigh { l2 }, Some(f)) if rayleigh_fit.is_none() => {
                rayleigh_fit = Some((*l2, f));
            }
            _ => {}
        }
    }
    match (loss_fit, rayleigh_fit) {
        (Some((a, fa)), Some((b, fb))) if a == b => {
            Ok(Some(equivalence_report(fa, fb)?.max_rel_diff))
        }
        _ => Ok(None),
    }
}

fn format_opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write rows as CSV with the fixed header order, newline-terminated.
pub fn write_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", RESULT_HEADER.join(","))?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            row.estimator,
            row.n,
            row.replication,
            format_opt_f64(row.rr_mse),
            format_opt_f64(row.weighting_estimate),
            format_opt_f64(row.dr_estimate),
            format_opt_f64(row.objective_value),
            format_opt_f64(row.equivalence_max_rel_diff),
            row.runtime_ms,
            row.error.as_deref().unwrap_or(""),
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Read a results CSV back, for round-trip checks and downstream tooling.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    {
        let headers = reader.headers()?;
        if headers.iter().ne(RESULT_HEADER.iter().copied()) {
            return Err(RieszError::Config(format!(
                "unexpected results header: {headers:?}"
            )));
        }
    }
    let parse_opt = |s: &str, row: usize, column: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse::<f64>().map(Some).map_err(|_| RieszError::Parse {
                row,
                column: column.into(),
                value: s.into(),
            })
        }
    };
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let get = |idx: usize| record.get(idx).unwrap_or("");
        rows.push(ResultRow {
            estimator: get(0).to_string(),
            n: get(1).parse().map_err(|_| RieszError::Parse {
                row,
                column: "n".into(),
                value: get(1).into(),
            })?,
            replication: get(2).parse().map_err(|_| RieszError::Parse {
                row,
                column: "replication".into(),
                value: get(2).into(),
            })?,
            rr_mse: parse_opt(get(3), row, "rr_mse")?,
            weighting_estimate: parse_opt(get(4), row, "weighting_estimate")?,
            dr_estimate: parse_opt(get(5), row, "dr_estimate")?,
            objective_value: parse_opt(get(6), row, "objective_value")?,
            equivalence_max_rel_diff: parse_opt(get(7), row, "equivalence_max_rel_diff")?,
            runtime_ms: get(8).parse().map_err(|_| RieszError::Parse {
                row,
                column: "runtime_ms".into(),
                value: get(8).into(),
            })?,
            error: {
                let e = get(9);
                if e.is_empty() {
                    None
                } else {
                    Some(e.to_string())
                }
            },
        });
    }
    Ok(rows)
}
