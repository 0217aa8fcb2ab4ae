//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by data generation, feature construction, solvers and trainers.
#[derive(Debug, Error)]
pub enum RieszError {
    /// Invalid configuration (bad dimensions, out-of-range hyperparameters, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Incompatible array shapes.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A mapped CSV column is absent from the file header.
    #[error("missing column `{0}`")]
    MissingColumn(String),

    /// A CSV cell failed to parse as a number. Rows are counted from 1,
    /// excluding the header.
    #[error("could not parse `{value}` in column `{column}` at data row {row}")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    /// The functional needs a dataset field (treatment, aux sample) that is absent.
    #[error("functional mismatch: {0}")]
    FunctionalMismatch(String),

    /// Non-finite values where finite numbers are required.
    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// A basis column with zero Gram diagonal cannot be updated by coordinate descent.
    #[error("degenerate basis column {0}: Gram diagonal is zero")]
    DegenerateColumn(usize),

    /// The moment vector is identically zero, so the Rayleigh maximizer is
    /// undefined (every direction attains quotient zero).
    #[error("moment vector is identically zero; the Rayleigh maximizer is undefined")]
    DegenerateFunctional,

    /// The network output is numerically zero at initialization; normalization
    /// would divide by (almost) zero. Retry with a different init seed.
    #[error("network second moment {0:.3e} is below norm_epsilon at initialization; reinitialize with a new seed")]
    DegenerateNetwork(f64),

    /// The training objective became non-finite.
    #[error("training diverged at epoch {0}: objective is not finite")]
    Divergence(usize),

    /// A dense factorization failed.
    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, RieszError>;
