//! Sieve feature construction: polynomial and random-Fourier bases, the
//! empirical Gram matrix, and optional column standardization.

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Result, RieszError};

/// Basis specification. Every kind emits a deterministic, stable column
/// ordering, documented per variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureBuilder {
    /// Columns `(1, t, B(w), t * B(w))` where `B(w)` lists per-coordinate
    /// powers `w_1..w_p, w_1^2..w_p^2, ..., w_1^K..w_p^K`. Requires a
    /// treatment column; expects model inputs of the form `(t, w)`.
    /// Degree 1 on scalar `w` yields exactly `(1, t, w, t*w)`.
    PolynomialWithTreatment { degree: usize },
    /// Columns `(1, x_1..x_p, x_1^2..x_p^2, ..., x_1^K..x_p^K)`.
    Polynomial { degree: usize },
    /// Random Fourier features `sqrt(2 / count) * cos(w_k . x + b_k)` with
    /// frequencies `w_k ~ N(0, bandwidth^-2 I)` and phases `b_k ~ U[0, 2pi)`,
    /// drawn once from the seed. Columns are ordered by `k`.
    RandomFourier {
        count: usize,
        bandwidth: f64,
        seed: u64,
    },
}

impl FeatureBuilder {
    pub fn requires_treatment(&self) -> bool {
        matches!(self, FeatureBuilder::PolynomialWithTreatment { .. })
    }

    fn validate(&self) -> Result<()> {
        match self {
            FeatureBuilder::RandomFourier {
                count, bandwidth, ..
            } => {
                if *count == 0 {
                    return Err(RieszError::Config(
                        "random Fourier feature count must be at least 1".into(),
                    ));
                }
                if !(*bandwidth > 0.0) {
                    return Err(RieszError::Config(format!(
                        "random Fourier bandwidth must be positive, got {bandwidth}"
                    )));
                }
            }
            FeatureBuilder::Polynomial { .. } | FeatureBuilder::PolynomialWithTreatment { .. } => {}
        }
        Ok(())
    }

    /// Bind the builder to a concrete input dimension so rows can be mapped.
    /// For `PolynomialWithTreatment` the input must be `(t, w)`, so
    /// `input_dim` must be at least 2.
    pub fn compile(&self, input_dim: usize) -> Result<FeatureMap> {
        self.validate()?;
        if input_dim == 0 {
            return Err(RieszError::Config("input dimension must be positive".into()));
        }
        let kind = match self {
            FeatureBuilder::Polynomial { degree } => CompiledKind::Polynomial { degree: *degree },
            FeatureBuilder::PolynomialWithTreatment { degree } => {
                if input_dim < 2 {
                    return Err(RieszError::Config(
                        "treatment-interacted basis needs inputs (t, w) with at least one covariate"
                            .into(),
                    ));
                }
                CompiledKind::PolynomialWithTreatment { degree: *degree }
            }
            FeatureBuilder::RandomFourier {
                count,
                bandwidth,
                seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let freq = Normal::new(0.0, 1.0 / bandwidth).expect("valid normal parameters");
                let mut weights = Array2::zeros((*count, input_dim));
                for k in 0..*count {
                    for j in 0..input_dim {
                        weights[[k, j]] = rng.sample(freq);
                    }
                }
                let mut phases = Array1::zeros(*count);
                for k in 0..*count {
                    phases[k] = rng.random::<f64>() * std::f64::consts::TAU;
                }
                CompiledKind::RandomFourier {
                    weights,
                    phases,
                    scale: (2.0 / *count as f64).sqrt(),
                }
            }
        };
        let output_dim = match &kind {
            CompiledKind::Polynomial { degree } => 1 + input_dim * degree,
            CompiledKind::PolynomialWithTreatment { degree } => 2 + 2 * (input_dim - 1) * degree,
            CompiledKind::RandomFourier { weights, .. } => weights.nrows(),
        };
        Ok(FeatureMap {
            kind,
            input_dim,
            output_dim,
        })
    }
}

#[derive(Debug, Clone)]
enum CompiledKind {
    Polynomial {
        degree: usize,
    },
    PolynomialWithTreatment {
        degree: usize,
    },
    RandomFourier {
        weights: Array2<f64>,
        phases: Array1<f64>,
        scale: f64,
    },
}

/// A feature builder bound to an input dimension; maps one observation (a
/// model-input row) to its feature vector.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    kind: CompiledKind,
    input_dim: usize,
    output_dim: usize,
}

impl FeatureMap {
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn eval(&self, input: ArrayView1<f64>) -> Result<Array1<f64>> {
        if input.len() != self.input_dim {
            return Err(RieszError::Shape(format!(
                "input has length {}, feature map expects {}",
                input.len(),
                self.input_dim
            )));
        }
        let mut out = Array1::zeros(self.output_dim);
        self.eval_into(input, &mut out);
        Ok(out)
    }

    fn eval_into(&self, input: ArrayView1<f64>, out: &mut Array1<f64>) {
        match &self.kind {
            CompiledKind::Polynomial { degree } => {
                out[0] = 1.0;
                let p = self.input_dim;
                let mut pow: Vec<f64> = vec![1.0; p];
                for k in 0..*degree {
                    for j in 0..p {
                        pow[j] *= input[j];
                        out[1 + k * p + j] = pow[j];
                    }
                }
            }
            CompiledKind::PolynomialWithTreatment { degree } => {
                let t = input[0];
                let p = self.input_dim - 1;
                let block = p * degree;
                out[0] = 1.0;
                out[1] = t;
                let mut pow: Vec<f64> = vec![1.0; p];
                for k in 0..*degree {
                    for j in 0..p {
                        pow[j] *= input[1 + j];
                        out[2 + k * p + j] = pow[j];
                        out[2 + block + k * p + j] = t * pow[j];
                    }
                }
            }
            CompiledKind::RandomFourier {
                weights,
                phases,
                scale,
            } => {
                for k in 0..weights.nrows() {
                    let arg = weights.row(k).dot(&input) + phases[k];
                    out[k] = scale * arg.cos();
                }
            }
        }
    }

    /// Map every row of an input matrix.
    pub fn eval_matrix(&self, inputs: &Array2<f64>) -> Result<FeatureMatrix> {
        if inputs.ncols() != self.input_dim {
            return Err(RieszError::Shape(format!(
                "inputs have {} columns, feature map expects {}",
                inputs.ncols(),
                self.input_dim
            )));
        }
        let mut values = Array2::zeros((inputs.nrows(), self.output_dim));
        let mut row = Array1::zeros(self.output_dim);
        for i in 0..inputs.nrows() {
            self.eval_into(inputs.row(i), &mut row);
            values.row_mut(i).assign(&row);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RieszError::NonFinite("feature matrix".into()));
        }
        Ok(FeatureMatrix { values })
    }
}

/// The n x d design matrix with rows `phi(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }
}

/// Empirical second-moment matrix of the features, `Phi' Phi / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub values: Array2<f64>,
    pub n_used: usize,
}

impl GramMatrix {
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// The Gram matrix shifted by `ridge` on the diagonal. Used for
    /// ridge-penalized fits, where the penalty adds to the quadratic form.
    pub fn ridged(&self, ridge: f64) -> GramMatrix {
        let mut values = self.values.clone();
        for j in 0..values.nrows() {
            values[[j, j]] += ridge;
        }
        GramMatrix {
            values,
            n_used: self.n_used,
        }
    }
}

/// Build the design matrix for a dataset. The model input is the covariate
/// row, preceded by the treatment coordinate when the dataset has one.
pub fn build_features(data: &Dataset, builder: &FeatureBuilder) -> Result<FeatureMatrix> {
    if builder.requires_treatment() && data.treatment().is_none() {
        return Err(RieszError::Config(
            "basis requires a treatment column but the dataset has none".into(),
        ));
    }
    let map = builder.compile(data.input_dim())?;
    map.eval_matrix(&data.model_inputs())
}

/// Empirical Gram matrix `Phi' Phi / n`, explicitly symmetrized so downstream
/// factorizations see an exactly symmetric input.
pub fn gram(features: &FeatureMatrix) -> GramMatrix {
    let n = features.n() as f64;
    let raw = features.values.t().dot(&features.values) / n;
    let values = (&raw + &raw.t()) / 2.0;
    GramMatrix {
        values,
        n_used: features.n(),
    }
}

/// Column centering/scaling recorded by [`standardize_features`]; applied to
/// held-out features so fitted coefficients stay interpretable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    #[serde(with = "crate::serde_util::array1")]
    pub mean: Array1<f64>,
    #[serde(with = "crate::serde_util::array1")]
    pub scale: Array1<f64>,
}

impl FeatureScaling {
    /// Z-score a feature matrix with the recorded statistics.
    pub fn apply(&self, features: &FeatureMatrix) -> Result<FeatureMatrix> {
        if features.dim() != self.mean.len() {
            return Err(RieszError::Shape(format!(
                "features have {} columns, scaling expects {}",
                features.dim(),
                self.mean.len()
            )));
        }
        let mut values = features.values.clone();
        for j in 0..values.ncols() {
            let (m, s) = (self.mean[j], self.scale[j]);
            values.column_mut(j).mapv_inplace(|v| (v - m) / s);
        }
        Ok(FeatureMatrix { values })
    }

    /// Transform a moment vector to the standardized columns. By linearity,
    /// the moment of `(phi_j - m_j) / s_j` is `(L_j - m_j * c) / s_j` where
    /// `c` is the moment of the constant-one function (0 for a treatment
    /// difference, 1 for a target mean).
    pub fn apply_to_moments(&self, values: &Array1<f64>, constant_moment: f64) -> Array1<f64> {
        let mut out = values.clone();
        for j in 0..out.len() {
            out[j] = (out[j] - self.mean[j] * constant_moment) / self.scale[j];
        }
        out
    }
}

/// Z-score the columns of a design matrix. Columns with (numerically) zero
/// variance pass through unchanged so intercepts survive.
pub fn standardize_features(features: &FeatureMatrix) -> (FeatureMatrix, FeatureScaling) {
    let n = features.n() as f64;
    let d = features.dim();
    let mut mean = Array1::zeros(d);
    let mut scale = Array1::ones(d);
    for j in 0..d {
        let col = features.values.column(j);
        let m = col.sum() / n;
        let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd > 1e-12 {
            mean[j] = m;
            scale[j] = sd;
        }
    }
    let scaling = FeatureScaling { mean, scale };
    let transformed = scaling.apply(features).expect("dimensions match");
    (transformed, scaling)
}
