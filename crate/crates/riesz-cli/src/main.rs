use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use riesz_cli::config::{EstimatorSpec, ExperimentConfig};
use riesz_cli::runner::{fit_estimator, run_experiment, SievePipeline};
use riesz_cli::{parse_basis, read_results};
use riesz_core::{
    equivalence_report, fit_outcome_model, load_dataset_csv, plug_in_estimates, random_instance,
    solve_lasso, solve_rayleigh, solve_riesz_loss, CsvSchema, Dataset, FunctionalSpec, Result,
    RieszError,
};

#[derive(Parser)]
#[command(
    name = "riesz",
    about = "Direct Riesz representer estimation: generate data, fit estimators, run experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with known representer and write it as CSV.
    Generate(GenerateArgs),
    /// Fit one estimator on a CSV dataset; write the fit as JSON, metrics to stdout.
    Fit(FitArgs),
    /// Run a replicated experiment described by a JSON config; write a results CSV.
    Experiment(ExperimentArgs),
    /// Compare the two closed-form estimators on random instances.
    Equivalence(EquivalenceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DgpKind {
    Ate,
    Shift,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    dgp: DgpKind,
    /// Sample size (source sample size for the shift DGP).
    #[arg(long)]
    n: usize,
    /// Covariate dimension (ATE only).
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// True treatment effect (ATE only).
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Propensity coefficients, comma separated; defaults to 0.5 per coordinate.
    #[arg(long, value_delimiter = ',')]
    propensity_coefs: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.05)]
    clip: f64,
    /// Outcome coefficients, comma separated; defaults to 1.0 per coordinate.
    #[arg(long, value_delimiter = ',')]
    outcome_coefs: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    noise_sd: f64,
    /// Target mean shift (shift DGP only).
    #[arg(long, default_value_t = 1.0)]
    mean_shift: f64,
    /// Target sample size (shift DGP only); defaults to --n.
    #[arg(long)]
    n_target: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Where to write the auxiliary target sample (shift DGP only);
    /// defaults to the output path with an `.aux.csv` suffix.
    #[arg(long)]
    aux_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FunctionalArg {
    Ate,
    ShiftMean,
}

impl From<FunctionalArg> for FunctionalSpec {
    fn from(f: FunctionalArg) -> Self {
        match f {
            FunctionalArg::Ate => FunctionalSpec::AteDifference,
            FunctionalArg::ShiftMean => FunctionalSpec::ShiftMean,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// CSV with the auxiliary target sample (same covariate columns).
    #[arg(long)]
    aux: Option<PathBuf>,
    #[arg(long, value_enum)]
    functional: FunctionalArg,
    /// Basis spec: poly-t:K, poly:K, or rff:COUNT,BW[,SEED].
    #[arg(long)]
    basis: String,
    /// One of: riesz-loss, rayleigh, lasso, rayleigh-l1, nn-riesz, nn-rayleigh.
    #[arg(long)]
    estimator: String,
    #[arg(long, default_value_t = 0.0)]
    l2: f64,
    #[arg(long, default_value_t = 0.1)]
    l1: f64,
    /// Hidden layer widths for the neural estimators.
    #[arg(long, value_delimiter = ',', default_values_t = [32usize, 32])]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    #[arg(long, default_value_t = 2000)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Z-score the sieve columns before the linear fit.
    #[arg(long)]
    standardize: bool,
    /// Covariate columns; defaults to every column not named t/y/alpha0.
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    /// Treatment column name (default `t`, used when present).
    #[arg(long)]
    treatment: Option<String>,
    /// Outcome column name (default `y`, used when present).
    #[arg(long)]
    outcome: Option<String>,
    /// Oracle representer column name (default `alpha0`, used when present).
    #[arg(long)]
    alpha0: Option<String>,
    /// Where to write the fit as JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output_path.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override the config's master_seed.
    #[arg(long)]
    master_seed: Option<u64>,
    /// Override the config's replications.
    #[arg(long)]
    replications: Option<usize>,
    /// Override the config's sample_sizes.
    #[arg(long, value_delimiter = ',')]
    sample_sizes: Option<Vec<usize>>,
}

#[derive(Args)]
struct EquivalenceArgs {
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ridge penalties to check (0 checks the unregularized pair).
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1e-3, 1e-1, 1.0])]
    l2: Vec<f64>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Also report the lasso vs l1-Rayleigh gap at this penalty.
    #[arg(long)]
    l1: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Equivalence(args) => cmd_equivalence(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<ExitCode> {
    match args.dgp {
        DgpKind::Ate => {
            let cfg = riesz_core::AteDgpConfig {
                n: args.n,
                p: args.p,
                tau: args.tau,
                propensity_coefs: args.propensity_coefs.unwrap_or(vec![0.5; args.p]),
                propensity_clip: args.clip,
                outcome_coefs: args.outcome_coefs.unwrap_or(vec![1.0; args.p]),
                noise_sd: args.noise_sd,
                seed: args.seed,
            };
            let data = riesz_core::generate_ate_dgp(&cfg)?;
            write_dataset_csv(&data, &args.out)?;
            println!(
                "wrote {} rows to {} (estimand truth {})",
                data.n(),
                args.out.display(),
                args.tau
            );
        }
        DgpKind::Shift => {
            let cfg = riesz_core::ShiftDgpConfig {
                n_source: args.n,
                n_target: args.n_target.unwrap_or(args.n),
                mean_shift: args.mean_shift,
                seed: args.seed,
            };
            let data = riesz_core::generate_shift_dgp(&cfg)?;
            write_dataset_csv(&data, &args.out)?;
            let aux_out = args
                .aux_out
                .unwrap_or_else(|| args.out.with_extension("aux.csv"));
            write_aux_csv(&data, &aux_out)?;
            println!(
                "wrote {} source rows to {} and {} target rows to {} (estimand truth {})",
                data.n(),
                args.out.display(),
                data.aux_sample().map(|a| a.nrows()).unwrap_or(0),
                aux_out.display(),
                data.estimand_truth().unwrap_or(f64::NAN)
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn write_dataset_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut header: Vec<String> = (1..=data.p()).map(|j| format!("w{j}")).collect();
    if data.treatment().is_some() {
        header.push("t".into());
    }
    if data.outcome().is_some() {
        header.push("y".into());
    }
    if data.oracle_alpha().is_some() {
        header.push("alpha0".into());
    }
    writeln!(out, "{}", header.join(","))?;
    for i in 0..data.n() {
        let mut cells: Vec<String> = (0..data.p())
            .map(|j| data.covariates()[[i, j]].to_string())
            .collect();
        if let Some(t) = data.treatment() {
            cells.push(t[i].to_string());
        }
        if let Some(y) = data.outcome() {
            cells.push(y[i].to_string());
        }
        if let Some(a) = data.oracle_alpha() {
            cells.push(a[i].to_string());
        }
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn write_aux_csv(data: &Dataset, path: &Path) -> Result<()> {
    let aux = data
        .aux_sample()
        .ok_or_else(|| RieszError::Config("dataset has no auxiliary sample".into()))?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = (1..=aux.ncols()).map(|j| format!("w{j}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for i in 0..aux.nrows() {
        let cells: Vec<String> = (0..aux.ncols()).map(|j| aux[[i, j]].to_string()).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn csv_headers(path: &Path) -> Result<Vec<String>> {
    let mut reader = csv::Reader::from_path(path)?;
    Ok(reader.headers()?.iter().map(str::to_owned).collect())
}

fn cmd_fit(args: FitArgs) -> Result<ExitCode> {
    let headers = csv_headers(&args.data)?;
    let lookup = |explicit: &Option<String>, default: &str| -> Result<Option<String>> {
        match explicit {
            Some(name) => {
                if headers.iter().any(|h| h == name) {
                    Ok(Some(name.clone()))
                } else {
                    Err(RieszError::MissingColumn(name.clone()))
                }
            }
            None => Ok(headers.iter().find(|h| *h == default).cloned()),
        }
    };
    let treatment = lookup(&args.treatment, "t")?;
    let outcome = lookup(&args.outcome, "y")?;
    let alpha0 = lookup(&args.alpha0, "alpha0")?;
    let covariates = match &args.covariates {
        Some(cols) => cols.clone(),
        None => {
            let special: Vec<&String> = [&treatment, &outcome, &alpha0]
                .iter()
                .filter_map(|o| o.as_ref())
                .collect();
            headers
                .iter()
                .filter(|h| !special.iter().any(|s| s == h))
                .cloned()
                .collect()
        }
    };
    let schema = CsvSchema {
        covariates,
        treatment,
        outcome,
        oracle_alpha: alpha0,
    };
    let mut data = load_dataset_csv(&args.data, &schema)?;
    if let Some(aux_path) = &args.aux {
        let aux_schema = CsvSchema {
            covariates: schema.covariates.clone(),
            ..CsvSchema::default()
        };
        let aux = load_dataset_csv(aux_path, &aux_schema)?;
        data = data.with_aux_sample(aux.covariates().clone())?;
    }

    let functional: FunctionalSpec = args.functional.into();
    let builder = parse_basis(&args.basis)?;
    let spec = estimator_spec_from_flags(&args)?;
    let pipeline = SievePipeline::build(&data, &functional, &builder, args.standardize)?;
    let fit = fit_estimator(&spec, &data, &functional, &pipeline, args.seed)?;

    let json = serde_json::to_string_pretty(&fit)
        .map_err(|e| RieszError::Config(format!("could not serialize fit: {e}")))?;
    std::fs::write(&args.out, json.as_bytes())?;

    let mut summary = serde_json::json!({
        "estimator": spec.name(),
        "objective_value": fit.objective_value(),
        "fit_path": args.out.display().to_string(),
    });
    if data.outcome().is_some() {
        let alpha = fit.predict(&data, &builder)?;
        let h_fit = fit_outcome_model(&data, &pipeline.features, 0.0).ok();
        let metrics = plug_in_estimates(
            &data,
            &functional,
            &alpha,
            h_fit.as_ref(),
            &pipeline.features,
            &builder,
        )?;
        summary["metrics"] = serde_json::to_value(&metrics)
            .map_err(|e| RieszError::Config(format!("could not serialize metrics: {e}")))?;
    }
    println!("{summary:#}");
    Ok(ExitCode::SUCCESS)
}

fn estimator_spec_from_flags(args: &FitArgs) -> Result<EstimatorSpec> {
    Ok(match args.estimator.as_str() {
        "riesz-loss" => EstimatorSpec::RieszLoss { l2: args.l2 },
        "rayleigh" => EstimatorSpec::Rayleigh { l2: args.l2 },
        "lasso" => EstimatorSpec::Lasso { l1: args.l1 },
        "rayleigh-l1" => EstimatorSpec::RayleighL1 { l1: args.l1 },
        "nn-riesz" => EstimatorSpec::NnRiesz {
            hidden: args.hidden.clone(),
            lr: args.lr,
            epochs: args.epochs,
        },
        "nn-rayleigh" => EstimatorSpec::NnRayleigh {
            hidden: args.hidden.clone(),
            lr: args.lr,
            epochs: args.epochs,
        },
        other => {
            return Err(RieszError::Config(format!(
                "unknown estimator `{other}`; expected riesz-loss, rayleigh, lasso, rayleigh-l1, nn-riesz, or nn-rayleigh"
            )))
        }
    })
}

fn cmd_experiment(args: ExperimentArgs) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::from_json_file(&args.config)?;
    if let Some(output) = args.output {
        cfg.output_path = output;
    }
    if let Some(seed) = args.master_seed {
        cfg.master_seed = seed;
    }
    if let Some(reps) = args.replications {
        cfg.replications = reps;
    }
    if let Some(sizes) = args.sample_sizes {
        cfg.sample_sizes = sizes;
    }
    let rows = run_experiment(&cfg)?;
    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    println!(
        "wrote {} rows to {} ({} estimator failures)",
        rows.len(),
        cfg.output_path.display(),
        failures
    );
    let _ = read_results(&cfg.output_path)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_equivalence(args: EquivalenceArgs) -> Result<ExitCode> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let instances: Vec<_> = (0..args.instances)
        .map(|_| random_instance(args.n, args.d, 1e6, &mut rng))
        .collect();

    let mut all_ok = true;
    for &l2 in &args.l2 {
        let mut worst = 0.0f64;
        for (g, m) in &instances {
            let loss_fit = solve_riesz_loss(g, m, l2)?;
            let rayleigh_fit = if l2 > 0.0 {
                solve_rayleigh(&g.ridged(l2), m, 0.0)?
            } else {
                solve_rayleigh(g, m, 0.0)?
            };
            let report = equivalence_report(&loss_fit, &rayleigh_fit)?;
            worst = worst.max(report.max_rel_diff);
        }
        let ok = worst <= args.tol;
        all_ok &= ok;
        println!(
            "l2={l2:<8} instances={} max_rel_diff={worst:.3e} {}",
            args.instances,
            if ok { "PASS" } else { "FAIL" }
        );
    }

    if let Some(l1) = args.l1 {
        let mut smallest_gap = f64::INFINITY;
        let mut largest_gap = 0.0f64;
        for (g, m) in &instances {
            let lasso_fit = solve_lasso(g, m, l1)?;
            let rayleigh_fit = solve_rayleigh(g, m, l1)?;
            let report = equivalence_report(&lasso_fit, &rayleigh_fit)?;
            smallest_gap = smallest_gap.min(report.max_abs_diff);
            largest_gap = largest_gap.max(report.max_abs_diff);
        }
        println!(
            "l1={l1:<8} lasso vs rayleigh-l1 max_abs_diff in [{smallest_gap:.3e}, {largest_gap:.3e}]"
        );
    }

    Ok(if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
