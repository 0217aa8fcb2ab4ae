//! Direct estimation of Riesz representers.
//!
//! Two sample objectives identify the same population object: a quadratic
//! loss whose minimizer is the representer, and a generalized Rayleigh
//! quotient whose maximizing ray contains it. This crate implements both
//! estimators over linear sieve bases (closed forms, ridge, lasso) and over a
//! small feed-forward network class (plain training and training constrained
//! to unit empirical second moment), together with synthetic data generators
//! whose true representers are available in closed form, and the evaluation
//! metrics and downstream estimand formulas used to compare everything.
//!
//! Modules:
//! - [`data`]: datasets, synthetic generators, CSV ingestion
//! - [`functional`]: the target functional and empirical moments
//! - [`sieve`]: feature maps, Gram matrices, standardization
//! - [`linear`]: closed-form/iterative solvers and the equivalence harness
//! - [`neural`]: the MLP function class and both trainers
//! - [`eval`]: representer accuracy and estimand computation

pub mod data;
pub mod error;
pub mod eval;
pub mod functional;
pub mod linear;
pub mod neural;
pub mod sieve;

pub(crate) mod serde_util;

pub use data::{
    generate_ate_dgp, generate_shift_dgp, load_dataset_csv, AteDgpConfig, CsvSchema, Dataset,
    ShiftDgpConfig,
};
pub use error::{Result, RieszError};
pub use eval::{fit_outcome_model, plug_in_estimates, rr_mse, MetricsReport, OutcomeFit};
pub use functional::{basis_moments, function_moment, FunctionalSpec, MomentVector};
pub use linear::{
    condition_number, equivalence_report, gram_nullspace, minnorm_pinv_solve, random_instance,
    solve_lasso, solve_rayleigh, solve_riesz_loss, EquivalenceReport, LinearRieszFit,
    ObjectiveKind,
};
pub use neural::{
    predict_alpha, train_rayleigh_constrained, train_riesz_loss, MlpConfig, NeuralRieszFit,
    TrainConfig, TrainerKind,
};
pub use sieve::{
    build_features, gram, standardize_features, FeatureBuilder, FeatureMap, FeatureMatrix,
    FeatureScaling, GramMatrix,
};
