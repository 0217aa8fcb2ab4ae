//! The linear functional under estimation, represented through its integrand,
//! and empirical moments of basis columns and black-box functions.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Result, RieszError};
use crate::sieve::{FeatureBuilder, FeatureMap};

/// Which functional the representer targets.
///
/// `AteDifference` is the treatment-arm difference `E[h(1, W) - h(0, W)]` and
/// needs a treatment column. `ShiftMean` is the mean under the target
/// distribution, taken over the dataset's auxiliary sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionalSpec {
    AteDifference,
    ShiftMean,
}

impl FunctionalSpec {
    /// Check that the dataset carries the fields this functional evaluates.
    pub fn check_compatible(&self, data: &Dataset) -> Result<()> {
        match self {
            FunctionalSpec::AteDifference => {
                if data.treatment().is_none() {
                    return Err(RieszError::FunctionalMismatch(
                        "treatment-difference functional needs a treatment column".into(),
                    ));
                }
            }
            FunctionalSpec::ShiftMean => {
                if data.aux_sample().is_none() {
                    return Err(RieszError::FunctionalMismatch(
                        "target-mean functional needs an auxiliary target sample".into(),
                    ));
                }
                if data.treatment().is_some() {
                    return Err(RieszError::FunctionalMismatch(
                        "target-mean functional over a dataset with a treatment column is not supported".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// The moment of the constant-one function: 0 for a difference of arms,
    /// 1 for a target mean. Used when re-expressing moments after column
    /// standardization.
    pub fn constant_moment(&self) -> f64 {
        match self {
            FunctionalSpec::AteDifference => 0.0,
            FunctionalSpec::ShiftMean => 1.0,
        }
    }
}

/// Empirical moments of the basis columns: the sample analog of the
/// functional applied to each feature.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    pub values: Array1<f64>,
    pub sample_size: usize,
}

impl MomentVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Empirical moment of every basis column.
///
/// For the treatment difference, component `j` is the sample mean of
/// `phi_j(1, w_i) - phi_j(0, w_i)`; for the target mean it is the mean of
/// `phi_j` over the auxiliary sample.
pub fn basis_moments(
    data: &Dataset,
    spec: &FunctionalSpec,
    builder: &FeatureBuilder,
) -> Result<MomentVector> {
    spec.check_compatible(data)?;
    let map = builder.compile(data.input_dim())?;
    basis_moments_with_map(data, spec, &map)
}

/// Same as [`basis_moments`], reusing an already-compiled feature map.
pub fn basis_moments_with_map(
    data: &Dataset,
    spec: &FunctionalSpec,
    map: &FeatureMap,
) -> Result<MomentVector> {
    spec.check_compatible(data)?;
    let (values, sample_size) = match spec {
        FunctionalSpec::AteDifference => {
            let treated = map.eval_matrix(&data.inputs_at_arm(1.0)?)?;
            let control = map.eval_matrix(&data.inputs_at_arm(0.0)?)?;
            let n = data.n() as f64;
            let mut acc = Array1::zeros(map.output_dim());
            for i in 0..data.n() {
                acc += &(&treated.values.row(i) - &control.values.row(i));
            }
            (acc / n, data.n())
        }
        FunctionalSpec::ShiftMean => {
            let aux = data.aux_sample().expect("checked above");
            let feats = map.eval_matrix(aux)?;
            let m = aux.nrows() as f64;
            let mut acc = Array1::zeros(map.output_dim());
            for i in 0..aux.nrows() {
                acc += &feats.values.row(i);
            }
            (acc / m, aux.nrows())
        }
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(RieszError::NonFinite("moment vector".into()));
    }
    Ok(MomentVector {
        values,
        sample_size,
    })
}

/// Empirical moment of a black-box function of the model input.
///
/// For the treatment difference, `f` is evaluated at both counterfactual
/// arms `(1, w)` and `(0, w)`; for the target mean it is averaged over the
/// auxiliary sample.
pub fn function_moment<F>(data: &Dataset, spec: &FunctionalSpec, f: F) -> Result<f64>
where
    F: Fn(ArrayView1<f64>) -> f64,
{
    spec.check_compatible(data)?;
    match spec {
        FunctionalSpec::AteDifference => {
            let treated = data.inputs_at_arm(1.0)?;
            let control = data.inputs_at_arm(0.0)?;
            let n = data.n() as f64;
            let mut acc = 0.0;
            for i in 0..data.n() {
                acc += f(treated.row(i)) - f(control.row(i));
            }
            Ok(acc / n)
        }
        FunctionalSpec::ShiftMean => {
            let aux = data.aux_sample().expect("checked above");
            let m = aux.nrows() as f64;
            let mut acc = 0.0;
            for i in 0..aux.nrows() {
                acc += f(aux.row(i));
            }
            Ok(acc / m)
        }
    }
}
