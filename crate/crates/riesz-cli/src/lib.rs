//! Library side of the `riesz` command line: experiment configuration and
//! the Monte Carlo runner.

pub mod config;
pub mod runner;

pub use config::{parse_basis, DgpSpec, EstimatorSpec, ExperimentConfig};
pub use runner::{
    fit_estimator, read_results, run_experiment, write_results, AnyFit, ResultRow, SievePipeline,
};
