//! Representer accuracy against oracle values and downstream estimand
//! computation: the weighting estimator and the doubly-robust form.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Result, RieszError};
use crate::functional::{basis_moments, FunctionalSpec};
use crate::linear::solve_spd_or_pinv;
use crate::sieve::{gram, FeatureBuilder, FeatureMatrix};

/// Evaluation summary for one fitted representer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Mean squared error of the predicted representer against the oracle,
    /// present when the dataset carries oracle values.
    pub rr_mse: Option<f64>,
    /// `mean(alpha_hat * y)`.
    pub weighting_estimate: f64,
    /// `E[m(h_hat)] + mean(alpha_hat * (y - h_hat))`, present when an outcome
    /// model was supplied.
    pub dr_estimate: Option<f64>,
    pub estimand_truth: Option<f64>,
    pub n_eval: usize,
}

/// Ridge regression of the outcome on the features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeFit {
    #[serde(with = "crate::serde_util::array1")]
    pub theta_h: Array1<f64>,
    pub l2: f64,
}

impl OutcomeFit {
    pub fn predict(&self, features: &FeatureMatrix) -> Result<Array1<f64>> {
        if features.dim() != self.theta_h.len() {
            return Err(RieszError::Shape(format!(
                "features have {} columns, outcome fit has {} coefficients",
                features.dim(),
                self.theta_h.len()
            )));
        }
        Ok(features.values.dot(&self.theta_h))
    }
}

/// Mean squared difference between predicted and oracle representer values.
pub fn rr_mse(predicted: &Array1<f64>, oracle: &Array1<f64>) -> Result<f64> {
    if predicted.len() != oracle.len() || predicted.is_empty() {
        return Err(RieszError::Shape(format!(
            "predicted has length {}, oracle has length {}",
            predicted.len(),
            oracle.len()
        )));
    }
    let n = predicted.len() as f64;
    Ok(predicted
        .iter()
        .zip(oracle.iter())
        .map(|(p, o)| (p - o) * (p - o))
        .sum::<f64>()
        / n)
}

/// Fit `theta_h = (G + l2 I)^-1 Phi' y / n`, the ridge regression of the
/// outcome on the basis columns.
pub fn fit_outcome_model(
    data: &Dataset,
    features: &FeatureMatrix,
    l2: f64,
) -> Result<OutcomeFit> {
    let y = data
        .outcome()
        .ok_or_else(|| RieszError::FunctionalMismatch("outcome model needs an outcome".into()))?;
    if features.n() != data.n() {
        return Err(RieszError::Shape(format!(
            "features have {} rows, dataset has {}",
            features.n(),
            data.n()
        )));
    }
    if !(l2 >= 0.0) {
        return Err(RieszError::Config(format!(
            "l2 penalty must be nonnegative, got {l2}"
        )));
    }
    let g = gram(features);
    let rhs = features.values.t().dot(y) / data.n() as f64;
    let (theta_h, _) = solve_spd_or_pinv(&g.values, &rhs, l2)?;
    Ok(OutcomeFit { theta_h, l2 })
}

/// Weighting and doubly-robust estimates of the target functional, plus the
/// representer MSE when the dataset carries oracle values.
///
/// The weighting estimate is `mean(alpha_hat * y)`. With an outcome model the
/// doubly-robust estimate adds the plug-in term `E[m(h_hat)]` (computed by
/// linearity as `theta_h . L_hat`) to the weighted residuals.
pub fn plug_in_estimates(
    data: &Dataset,
    spec: &FunctionalSpec,
    alpha_hat: &Array1<f64>,
    h_fit: Option<&OutcomeFit>,
    features: &FeatureMatrix,
    builder: &FeatureBuilder,
) -> Result<MetricsReport> {
    let y = data
        .outcome()
        .ok_or_else(|| RieszError::FunctionalMismatch("estimates need an outcome".into()))?;
    if alpha_hat.len() != data.n() {
        return Err(RieszError::Shape(format!(
            "alpha_hat has length {}, dataset has {} rows",
            alpha_hat.len(),
            data.n()
        )));
    }
    let n = data.n() as f64;
    let weighting_estimate = alpha_hat.dot(y) / n;

    let dr_estimate = match h_fit {
        Some(fit) => {
            let moments = basis_moments(data, spec, builder)?;
            if fit.theta_h.len() != moments.dim() {
                return Err(RieszError::Shape(format!(
                    "outcome fit has {} coefficients, basis has {} columns",
                    fit.theta_h.len(),
                    moments.dim()
                )));
            }
            let h_hat = fit.predict(features)?;
            let plug_in = fit.theta_h.dot(&moments.values);
            let correction = alpha_hat
                .iter()
                .zip(y.iter().zip(h_hat.iter()))
                .map(|(a, (yi, hi))| a * (yi - hi))
                .sum::<f64>()
                / n;
            Some(plug_in + correction)
        }
        None => None,
    };

    let rr = match data.oracle_alpha() {
        Some(oracle) => Some(rr_mse(alpha_hat, oracle)?),
        None => None,
    };

    Ok(MetricsReport {
        rr_mse: rr,
        weighting_estimate,
        dr_estimate,
        estimand_truth: data.estimand_truth(),
        n_eval: data.n(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_ate_dgp, AteDgpConfig, Dataset};
    use crate::sieve::build_features;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ate_cfg(n: usize, noise_sd: f64, seed: u64) -> AteDgpConfig {
        AteDgpConfig {
            n,
            p: 1,
            tau: 1.0,
            propensity_coefs: vec![0.5],
            propensity_clip: 0.05,
            outcome_coefs: vec![1.0],
            noise_sd,
            seed,
        }
    }

    #[test]
    fn rr_mse_basics() {
        let a = array![1.0, -2.0, 0.5];
        assert_eq!(rr_mse(&a, &a).unwrap(), 0.0);
        let b = &a + 1.0;
        assert_eq!(rr_mse(&b, &a).unwrap(), 1.0);
        assert!(rr_mse(&a, &array![1.0]).is_err());
    }

    #[test]
    fn rr_mse_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = Array1::from_shape_fn(7, |_| rng.random::<f64>() * 4.0 - 2.0);
        let o = Array1::from_shape_fn(7, |_| rng.random::<f64>() * 4.0 - 2.0);
        let mut acc = 0.0;
        for i in 0..7 {
            let d = p[i] - o[i];
            acc += d * d;
        }
        assert!((rr_mse(&p, &o).unwrap() - acc / 7.0).abs() < 1e-15);
    }

    #[test]
    fn rr_mse_is_permutation_invariant() {
        let p = array![0.3, -1.0, 2.0, 0.7];
        let o = array![0.1, -0.9, 2.5, 0.0];
        let perm = [2usize, 0, 3, 1];
        let pp = Array1::from_shape_fn(4, |i| p[perm[i]]);
        let op = Array1::from_shape_fn(4, |i| o[perm[i]]);
        assert_eq!(rr_mse(&p, &o).unwrap(), rr_mse(&pp, &op).unwrap());
    }

    #[test]
    fn noiseless_linear_outcome_is_interpolated() {
        let data = generate_ate_dgp(&ate_cfg(300, 0.0, 3)).unwrap();
        let builder = FeatureBuilder::PolynomialWithTreatment { degree: 1 };
        let features = build_features(&data, &builder).unwrap();
        let fit = fit_outcome_model(&data, &features, 0.0).unwrap();
        let pred = fit.predict(&features).unwrap();
        let y = data.outcome().unwrap();
        for i in 0..data.n() {
            assert!((pred[i] - y[i]).abs() < 1e-8, "row {i}");
        }
    }

    #[test]
    fn huge_ridge_shrinks_coefficients() {
        let data = generate_ate_dgp(&ate_cfg(300, 0.5, 4)).unwrap();
        let builder = FeatureBuilder::PolynomialWithTreatment { degree: 1 };
        let features = build_features(&data, &builder).unwrap();
        let free = fit_outcome_model(&data, &features, 0.0).unwrap();
        let shrunk = fit_outcome_model(&data, &features, 1e6).unwrap();
        let norm = |t: &Array1<f64>| t.dot(t).sqrt();
        assert!(norm(&shrunk.theta_h) <= 1e-3 * norm(&free.theta_h));
    }

    #[test]
    fn outcome_fit_matches_normal_equations_oracle() {
        // Independent route: Gauss-Jordan elimination on the normal equations.
        let data = generate_ate_dgp(&ate_cfg(120, 0.7, 5)).unwrap();
        let builder = FeatureBuilder::PolynomialWithTreatment { degree: 2 };
        let features = build_features(&data, &builder).unwrap();
        let l2 = 0.05;
        let fit = fit_outcome_model(&data, &features, l2).unwrap();

        let n = data.n() as f64;
        let d = features.dim();
        let mut a = features.values.t().dot(&features.values) / n;
        for j in 0..d {
            a[[j, j]] += l2;
        }
        let mut b = features.values.t().dot(data.outcome().unwrap()) / n;
        // Gauss-Jordan with partial pivoting.
        let mut m = a.clone();
        for col in 0..d {
            let pivot = (col..d)
                .max_by(|&i, &j| m[[i, col]].abs().partial_cmp(&m[[j, col]].abs()).unwrap())
                .unwrap();
            if pivot != col {
                for k in 0..d {
                    let tmp = m[[col, k]];
                    m[[col, k]] = m[[pivot, k]];
                    m[[pivot, k]] = tmp;
                }
                b.swap(col, pivot);
            }
            let diag = m[[col, col]];
            for k in 0..d {
                m[[col, k]] /= diag;
            }
            b[col] /= diag;
            for row in 0..d {
                if row != col {
                    let factor = m[[row, col]];
                    for k in 0..d {
                        m[[row, k]] -= factor * m[[col, k]];
                    }
                    b[row] -= factor * b[col];
                }
            }
        }
        for j in 0..d {
            assert!(
                (fit.theta_h[j] - b[j]).abs() < 1e-10,
                "coefficient {j}: {} vs {}",
                fit.theta_h[j],
                b[j]
            );
        }
    }

    /// Hand-built dataset with dyadic values so y = 2 t + w is reproduced
    /// bit-exactly by the outcome model coefficients (0, 2, 1, 0).
    fn exact_dataset() -> (Dataset, FeatureBuilder, FeatureMatrix, OutcomeFit) {
        let w = array![[0.5], [-0.25], [0.75], [0.0]];
        let t = array![1.0, 0.0, 1.0, 0.0];
        let y = Array1::from_shape_fn(4, |i| 2.0 * t[i] + w[[i, 0]]);
        let data = Dataset::new(w)
            .unwrap()
            .with_treatment(t)
            .unwrap()
            .with_outcome(y)
            .unwrap();
        let builder = FeatureBuilder::PolynomialWithTreatment { degree: 1 };
        let features = build_features(&data, &builder).unwrap();
        let h = OutcomeFit {
            theta_h: array![0.0, 2.0, 1.0, 0.0],
            l2: 0.0,
        };
        (data, builder, features, h)
    }

    #[test]
    fn zero_alpha_gives_pure_plug_in() {
        let (data, builder, features, h) = exact_dataset();
        let alpha = Array1::zeros(4);
        let report = plug_in_estimates(
            &data,
            &FunctionalSpec::AteDifference,
            &alpha,
            Some(&h),
            &features,
            &builder,
        )
        .unwrap();
        assert_eq!(report.weighting_estimate, 0.0);
        // dr equals theta_h . L_hat exactly; here that is 2.
        assert_eq!(report.dr_estimate, Some(2.0));
    }

    #[test]
    fn exact_outcome_model_kills_the_correction() {
        let (data, builder, features, h) = exact_dataset();
        let alpha = array![1.5, -0.5, 2.0, -3.0];
        let report = plug_in_estimates(
            &data,
            &FunctionalSpec::AteDifference,
            &alpha,
            Some(&h),
            &features,
            &builder,
        )
        .unwrap();
        // Residuals are exactly zero, so dr is exactly the plug-in value.
        assert_eq!(report.dr_estimate, Some(2.0));
    }

    #[test]
    fn zero_outcome_model_reduces_dr_to_weighting() {
        let (data, builder, features, _) = exact_dataset();
        let h0 = OutcomeFit {
            theta_h: Array1::zeros(4),
            l2: 0.0,
        };
        let alpha = array![2.0, -2.0, 2.0, -2.0];
        let report = plug_in_estimates(
            &data,
            &FunctionalSpec::AteDifference,
            &alpha,
            Some(&h0),
            &features,
            &builder,
        )
        .unwrap();
        assert_eq!(report.dr_estimate, Some(report.weighting_estimate));
    }

    #[test]
    fn oracle_weights_recover_the_truth() {
        // alpha = oracle, noiseless outcome: the weighting estimate sits
        // within 3 standard errors of tau.
        let data = generate_ate_dgp(&ate_cfg(5000, 0.0, 6)).unwrap();
        let builder = FeatureBuilder::PolynomialWithTreatment { degree: 1 };
        let features = build_features(&data, &builder).unwrap();
        let alpha = data.oracle_alpha().unwrap().clone();
        let report = plug_in_estimates(
            &data,
            &FunctionalSpec::AteDifference,
            &alpha,
            None,
            &features,
            &builder,
        )
        .unwrap();
        let y = data.outcome().unwrap();
        let n = data.n() as f64;
        let mean = report.weighting_estimate;
        let var = alpha
            .iter()
            .zip(y.iter())
            .map(|(a, yi)| (a * yi - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        let se = (var / n).sqrt();
        assert!(
            (mean - 1.0).abs() <= 3.0 * se,
            "estimate {mean} further than 3 x {se} from 1"
        );
        assert_eq!(report.rr_mse, Some(0.0));
        assert_eq!(report.estimand_truth, Some(1.0));
    }

    #[test]
    fn missing_outcome_is_reported() {
        let data = Dataset::new(Array2::ones((3, 1))).unwrap();
        let builder = FeatureBuilder::Polynomial { degree: 1 };
        let features = build_features(&data, &builder).unwrap();
        assert!(matches!(
            plug_in_estimates(
                &data,
                &FunctionalSpec::AteDifference,
                &Array1::zeros(3),
                None,
                &features,
                &builder
            ),
            Err(RieszError::FunctionalMismatch(_))
        ));
        assert!(matches!(
            fit_outcome_model(&data, &features, 0.0),
            Err(RieszError::FunctionalMismatch(_))
        ));
    }
}
