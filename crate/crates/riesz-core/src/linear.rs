//! Closed-form and iterative solvers for the two sample problems over linear
//! sieves, plus the harness used to compare them.
//!
//! Both problems are driven by the pair (Gram matrix, moment vector). The
//! quadratic loss is minimized in closed form; the quotient problem is solved
//! in closed form when unpenalized and by projected gradient ascent on the
//! Gram ellipsoid under an l1 penalty. Direct solves use a symmetric
//! positive-definite factorization and fall back to the SVD pseudoinverse
//! (minimum-norm solution) when the factorization fails.

use ndarray::{Array1, Array2};
use ndarray_linalg::cholesky::SolveC;
use ndarray_linalg::svd::SVD;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RieszError};
use crate::functional::MomentVector;
use crate::sieve::{FeatureMatrix, FeatureScaling, GramMatrix};

/// Which sample problem a fit solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectiveKind {
    /// Minimize `theta' G theta - 2 theta' L` (plus penalties).
    RieszLoss,
    /// Maximize the generalized quotient `(theta' L)^2 / (theta' G theta)`.
    Rayleigh,
}

/// A fitted linear representer with solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRieszFit {
    #[serde(with = "crate::serde_util::array1")]
    pub theta: Array1<f64>,
    pub l2_penalty: f64,
    pub l1_penalty: f64,
    pub objective_kind: ObjectiveKind,
    pub objective_value: f64,
    /// The fitted quadratic form `theta' G theta`.
    pub gnorm_sq: f64,
    /// True when the solution came through the pseudoinverse path.
    pub used_min_norm: bool,
    /// Sweeps or gradient steps for iterative solvers; 0 for closed forms.
    pub iterations: usize,
    /// Column scaling applied to the features this fit was trained on, when
    /// the caller standardized them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<FeatureScaling>,
}

impl LinearRieszFit {
    pub fn with_scaling(mut self, scaling: FeatureScaling) -> Self {
        self.scaling = Some(scaling);
        self
    }

    /// Evaluate the fitted representer on (raw) features, applying the
    /// recorded standardization when present.
    pub fn predict(&self, features: &FeatureMatrix) -> Result<Array1<f64>> {
        let dim_expected = self.theta.len();
        if features.dim() != dim_expected {
            return Err(RieszError::Shape(format!(
                "features have {} columns, fit has {} coefficients",
                features.dim(),
                dim_expected
            )));
        }
        match &self.scaling {
            Some(s) => Ok(s.apply(features)?.values.dot(&self.theta)),
            None => Ok(features.values.dot(&self.theta)),
        }
    }
}

/// Componentwise disagreement between two fitted coefficient vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub max_abs_diff: f64,
    pub max_rel_diff: f64,
    pub settings: String,
}

fn check_pair(gram: &GramMatrix, moments: &MomentVector) -> Result<()> {
    if gram.values.nrows() != gram.values.ncols() {
        return Err(RieszError::Shape(format!(
            "Gram matrix is {}x{}, expected square",
            gram.values.nrows(),
            gram.values.ncols()
        )));
    }
    if gram.dim() != moments.dim() {
        return Err(RieszError::Shape(format!(
            "Gram matrix is {}x{} but the moment vector has length {}",
            gram.dim(),
            gram.dim(),
            moments.dim()
        )));
    }
    if gram.values.iter().any(|v| !v.is_finite()) {
        return Err(RieszError::NonFinite("Gram matrix".into()));
    }
    if moments.values.iter().any(|v| !v.is_finite()) {
        return Err(RieszError::NonFinite("moment vector".into()));
    }
    Ok(())
}

/// Minimum-norm least-squares solve via the SVD pseudoinverse, with singular
/// values below `d * eps * sigma_max` treated as zero.
fn pinv_solve(a: &Array2<f64>, rhs: &Array1<f64>) -> Result<Array1<f64>> {
    let (u, s, vt) = a
        .svd(true, true)
        .map_err(|e| RieszError::Linalg(format!("SVD failed: {e}")))?;
    let u = u.expect("requested U");
    let vt = vt.expect("requested V^T");
    let cutoff = pinv_cutoff(a.nrows(), &s);
    let mut coef = u.t().dot(rhs);
    for (i, c) in coef.iter_mut().enumerate() {
        *c = if s[i] > cutoff { *c / s[i] } else { 0.0 };
    }
    Ok(vt.t().dot(&coef))
}

fn pinv_cutoff(dim: usize, singular_values: &Array1<f64>) -> f64 {
    let sigma_max = singular_values.iter().cloned().fold(0.0f64, f64::max);
    dim as f64 * f64::EPSILON * sigma_max
}

/// Solve `(G + ridge I) theta = rhs`. Returns the solution and whether the
/// pseudoinverse fallback was taken.
pub(crate) fn solve_spd_or_pinv(
    gram: &Array2<f64>,
    rhs: &Array1<f64>,
    ridge: f64,
) -> Result<(Array1<f64>, bool)> {
    let mut a = gram.clone();
    if ridge != 0.0 {
        for j in 0..a.nrows() {
            a[[j, j]] += ridge;
        }
    }
    match a.solvec(rhs) {
        Ok(theta) => Ok((theta, false)),
        Err(_) => Ok((pinv_solve(&a, rhs)?, true)),
    }
}

/// Minimize the sample quadratic loss `theta' G theta - 2 theta' L` with an
/// optional ridge penalty `l2 |theta|_2^2`.
///
/// With `l2 = 0` and a singular Gram matrix the solver falls back to the
/// pseudoinverse and returns the minimum-norm minimizer, flagged by
/// `used_min_norm`.
pub fn solve_riesz_loss(
    gram: &GramMatrix,
    moments: &MomentVector,
    l2: f64,
) -> Result<LinearRieszFit> {
    check_pair(gram, moments)?;
    if !(l2 >= 0.0) {
        return Err(RieszError::Config(format!(
            "l2 penalty must be nonnegative, got {l2}"
        )));
    }
    let (theta, used_min_norm) = solve_spd_or_pinv(&gram.values, &moments.values, l2)?;
    let gnorm_sq = theta.dot(&gram.values.dot(&theta));
    let objective_value =
        gnorm_sq - 2.0 * theta.dot(&moments.values) + l2 * theta.dot(&theta);
    Ok(LinearRieszFit {
        theta,
        l2_penalty: l2,
        l1_penalty: 0.0,
        objective_kind: ObjectiveKind::RieszLoss,
        objective_value,
        gnorm_sq,
        used_min_norm,
        iterations: 0,
        scaling: None,
    })
}

/// Minimum-norm solution `G^+ L` through the SVD pseudoinverse, regardless of
/// whether `G` is invertible.
pub fn minnorm_pinv_solve(gram: &GramMatrix, moments: &MomentVector) -> Result<LinearRieszFit> {
    check_pair(gram, moments)?;
    let theta = pinv_solve(&gram.values, &moments.values)?;
    let gnorm_sq = theta.dot(&gram.values.dot(&theta));
    let objective_value = gnorm_sq - 2.0 * theta.dot(&moments.values);
    Ok(LinearRieszFit {
        theta,
        l2_penalty: 0.0,
        l1_penalty: 0.0,
        objective_kind: ObjectiveKind::RieszLoss,
        objective_value,
        gnorm_sq,
        used_min_norm: true,
        iterations: 0,
        scaling: None,
    })
}

/// An orthonormal basis of the (numerical) null space of the Gram matrix,
/// one column per direction, using the same singular-value cutoff as the
/// pseudoinverse. The result has zero columns when `G` has full rank.
pub fn gram_nullspace(gram: &GramMatrix) -> Result<Array2<f64>> {
    let (_, s, vt) = gram
        .values
        .svd(false, true)
        .map_err(|e| RieszError::Linalg(format!("SVD failed: {e}")))?;
    let vt = vt.expect("requested V^T");
    let cutoff = pinv_cutoff(gram.dim(), &s);
    let null_cols: Vec<usize> = (0..gram.dim())
        .filter(|&i| i >= s.len() || s[i] <= cutoff)
        .collect();
    let mut basis = Array2::zeros((gram.dim(), null_cols.len()));
    for (k, &i) in null_cols.iter().enumerate() {
        basis.column_mut(k).assign(&vt.row(i));
    }
    Ok(basis)
}

/// Condition number (ratio of extreme singular values) of the Gram matrix.
pub fn condition_number(gram: &GramMatrix) -> Result<f64> {
    let (_, s, _) = gram
        .values
        .svd(false, false)
        .map_err(|e| RieszError::Linalg(format!("SVD failed: {e}")))?;
    let max = s.iter().cloned().fold(0.0f64, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(max / min)
}

fn soft_threshold(x: f64, k: f64) -> f64 {
    if x > k {
        x - k
    } else if x < -k {
        x + k
    } else {
        0.0
    }
}

const LASSO_TOL: f64 = 1e-10;
const LASSO_MAX_SWEEPS: usize = 10_000;

/// Minimize `theta' G theta - 2 theta' L + l1 |theta|_1` by cyclic coordinate
/// descent with the soft-threshold update
/// `theta_j <- soft(L_j - sum_{k != j} G_jk theta_k, l1/2) / G_jj`,
/// stopping when the largest coordinate change in a sweep drops below 1e-10
/// (or after 10,000 sweeps).
pub fn solve_lasso(gram: &GramMatrix, moments: &MomentVector, l1: f64) -> Result<LinearRieszFit> {
    check_pair(gram, moments)?;
    if !(l1 > 0.0) {
        return Err(RieszError::Config(format!(
            "l1 penalty must be positive, got {l1}"
        )));
    }
    let d = gram.dim();
    let g = &gram.values;
    for j in 0..d {
        if g[[j, j]] <= 0.0 {
            return Err(RieszError::DegenerateColumn(j));
        }
    }

    let lhat = &moments.values;
    let mut theta = Array1::zeros(d);
    let mut iterations = 0;
    for sweep in 1..=LASSO_MAX_SWEEPS {
        let mut max_delta = 0.0f64;
        for j in 0..d {
            let gjj = g[[j, j]];
            let partial = g.row(j).dot(&theta) - gjj * theta[j];
            let updated = soft_threshold(lhat[j] - partial, l1 / 2.0) / gjj;
            max_delta = max_delta.max((updated - theta[j]).abs());
            theta[j] = updated;
        }
        iterations = sweep;
        if max_delta < LASSO_TOL {
            break;
        }
    }

    let gnorm_sq = theta.dot(&g.dot(&theta));
    let objective_value = gnorm_sq - 2.0 * theta.dot(lhat)
        + l1 * theta.iter().map(|t| t.abs()).sum::<f64>();
    Ok(LinearRieszFit {
        theta,
        l2_penalty: 0.0,
        l1_penalty: l1,
        objective_kind: ObjectiveKind::RieszLoss,
        objective_value,
        gnorm_sq,
        used_min_norm: false,
        iterations,
        scaling: None,
    })
}

const RAYLEIGH_STEP: f64 = 1e-2;
const RAYLEIGH_MAX_ITERS: usize = 5_000;
const RAYLEIGH_TOL: f64 = 1e-10;

/// Projected gradient ascent for the penalized quotient problem: maximize
/// `(u' L)^2 - l1 |u|_1` over the ellipsoid `u' G u = 1`, projecting back
/// onto the ellipsoid along the ray after every step. Returns the final
/// (feasible) direction and the number of steps taken.
pub(crate) fn rayleigh_l1_direction(
    gram: &GramMatrix,
    moments: &MomentVector,
    l1: f64,
) -> Result<(Array1<f64>, usize, bool)> {
    let g = &gram.values;
    let lhat = &moments.values;
    let (theta0, used_min_norm) = solve_spd_or_pinv(g, lhat, 0.0)?;
    let q0 = theta0.dot(&g.dot(&theta0));
    if !(q0 > 0.0) {
        return Err(RieszError::Linalg(
            "initial direction has zero Gram norm; the quotient is unbounded ill-posed".into(),
        ));
    }
    let mut u = &theta0 / q0.sqrt();

    let objective = |u: &Array1<f64>| -> f64 {
        let m = u.dot(lhat);
        m * m - l1 * u.iter().map(|v| v.abs()).sum::<f64>()
    };

    let mut obj = objective(&u);
    let mut iterations = 0;
    for step in 1..=RAYLEIGH_MAX_ITERS {
        let m = u.dot(lhat);
        let grad = Array1::from_shape_fn(u.len(), |j| 2.0 * m * lhat[j] - l1 * u[j].signum_or_zero());
        let mut candidate = &u + &(grad * RAYLEIGH_STEP);
        let q = candidate.dot(&g.dot(&candidate));
        if !(q > 0.0) {
            return Err(RieszError::Linalg(
                "gradient step left the Gram ellipsoid degenerate".into(),
            ));
        }
        candidate /= q.sqrt();
        let new_obj = objective(&candidate);
        u = candidate;
        iterations = step;
        if (new_obj - obj).abs() < RAYLEIGH_TOL {
            obj = new_obj;
            break;
        }
        obj = new_obj;
    }
    let _ = obj;
    Ok((u, iterations, used_min_norm))
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    /// Subgradient choice for |.| at 0.
    fn signum_or_zero(self) -> f64 {
        if self == 0.0 {
            0.0
        } else {
            self.signum()
        }
    }
}

/// Maximize the sample quotient `(theta' L)^2 / (theta' G theta)`.
///
/// Unpenalized, the maximizing ray is `G^-1 L` and this returns exactly that
/// solution: the scalar multiple whose fitted quadratic form equals the
/// maximized quotient value. With `l1 > 0` the quotient is maximized on the
/// Gram ellipsoid with the penalty subtracted, and the returned coefficients
/// are the representer-scaled direction `(u' L) u`.
pub fn solve_rayleigh(gram: &GramMatrix, moments: &MomentVector, l1: f64) -> Result<LinearRieszFit> {
    check_pair(gram, moments)?;
    if !(l1 >= 0.0) {
        return Err(RieszError::Config(format!(
            "l1 penalty must be nonnegative, got {l1}"
        )));
    }
    if moments.values.iter().all(|&v| v == 0.0) {
        return Err(RieszError::DegenerateFunctional);
    }

    if l1 == 0.0 {
        let (theta, used_min_norm) = solve_spd_or_pinv(&gram.values, &moments.values, 0.0)?;
        let gnorm_sq = theta.dot(&gram.values.dot(&theta));
        let objective_value = theta.dot(&moments.values);
        return Ok(LinearRieszFit {
            theta,
            l2_penalty: 0.0,
            l1_penalty: 0.0,
            objective_kind: ObjectiveKind::Rayleigh,
            objective_value,
            gnorm_sq,
            used_min_norm,
            iterations: 0,
            scaling: None,
        });
    }

    let (u, iterations, used_min_norm) = rayleigh_l1_direction(gram, moments, l1)?;
    let c = u.dot(&moments.values);
    let theta = &u * c;
    let gnorm_sq = theta.dot(&gram.values.dot(&theta));
    let objective_value = c * c - l1 * u.iter().map(|v| v.abs()).sum::<f64>();
    Ok(LinearRieszFit {
        theta,
        l2_penalty: 0.0,
        l1_penalty: l1,
        objective_kind: ObjectiveKind::Rayleigh,
        objective_value,
        gnorm_sq,
        used_min_norm,
        iterations,
        scaling: None,
    })
}

/// Componentwise comparison of two fitted coefficient vectors.
pub fn equivalence_report(a: &LinearRieszFit, b: &LinearRieszFit) -> Result<EquivalenceReport> {
    if a.theta.len() != b.theta.len() {
        return Err(RieszError::Shape(format!(
            "fits have {} and {} coefficients",
            a.theta.len(),
            b.theta.len()
        )));
    }
    let max_abs_diff = a
        .theta
        .iter()
        .zip(b.theta.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);
    let norm_a = a.theta.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
    let norm_b = b.theta.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
    let max_rel_diff = max_abs_diff / norm_a.max(norm_b).max(1e-300);
    Ok(EquivalenceReport {
        max_abs_diff,
        max_rel_diff,
        settings: format!(
            "{:?}(l2={}, l1={}) vs {:?}(l2={}, l1={})",
            a.objective_kind, a.l2_penalty, a.l1_penalty, b.objective_kind, b.l2_penalty, b.l1_penalty
        ),
    })
}

/// A random well-posed problem instance: an n x d standard-normal design's
/// Gram matrix paired with a standard-normal moment vector, redrawn until the
/// Gram condition number is at most `max_cond`.
pub fn random_instance<R: Rng>(
    n: usize,
    d: usize,
    max_cond: f64,
    rng: &mut R,
) -> (GramMatrix, MomentVector) {
    loop {
        let phi = Array2::from_shape_fn((n, d), |_| StandardNormal.sample(rng));
        let g = crate::sieve::gram(&FeatureMatrix { values: phi });
        if condition_number(&g).map(|c| c <= max_cond).unwrap_or(false) {
            let values = Array1::from_shape_fn(d, |_| StandardNormal.sample(rng));
            return (
                g,
                MomentVector {
                    values,
                    sample_size: n,
                },
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gram_of(values: Array2<f64>) -> GramMatrix {
        let n = values.nrows();
        GramMatrix {
            values,
            n_used: n,
        }
    }

    fn moments_of(values: Array1<f64>) -> MomentVector {
        let n = values.len();
        MomentVector {
            values,
            sample_size: n,
        }
    }

    #[test]
    fn identity_gram_returns_moments() {
        let g = gram_of(Array2::eye(3));
        let m = moments_of(array![0.0, 1.0, 0.0]);
        let fit = solve_riesz_loss(&g, &m, 0.0).unwrap();
        assert_eq!(fit.theta, array![0.0, 1.0, 0.0]);
        assert!(!fit.used_min_norm);
        assert!((fit.objective_value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_ridge_shrinks() {
        let g = gram_of(array![[1.0]]);
        let m = moments_of(array![2.0]);
        let fit = solve_riesz_loss(&g, &m, 1.0).unwrap();
        assert!((fit.theta[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn riesz_loss_matches_grid_search() {
        // Independent brute-force oracle: dense grid over [-5, 5]^2.
        let g = gram_of(array![[2.0, 0.3], [0.3, 1.0]]);
        let m = moments_of(array![1.0, -0.5]);
        let fit = solve_riesz_loss(&g, &m, 0.0).unwrap();

        let loss = |t0: f64, t1: f64| {
            2.0 * t0 * t0 + 0.6 * t0 * t1 + t1 * t1 - 2.0 * (t0 - 0.5 * t1)
        };
        let step = 1e-3;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let mut t0 = -5.0;
        while t0 <= 5.0 {
            let mut t1 = -5.0;
            while t1 <= 5.0 {
                let v = loss(t0, t1);
                if v < best.0 {
                    best = (v, t0, t1);
                }
                t1 += step;
            }
            t0 += step;
        }
        assert!((fit.theta[0] - best.1).abs() <= step);
        assert!((fit.theta[1] - best.2).abs() <= step);
    }

    #[test]
    fn min_value_identity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let (g, m) = random_instance(60, 5, 1e6, &mut rng);
            let fit = solve_riesz_loss(&g, &m, 0.0).unwrap();
            let rel = (fit.objective_value + fit.gnorm_sq).abs() / fit.gnorm_sq.max(1e-300);
            assert!(rel < 1e-10, "relative identity error {rel}");
        }
    }

    #[test]
    fn lasso_scalar_soft_threshold() {
        let g = gram_of(array![[1.0]]);
        let m = moments_of(array![2.0]);
        let fit = solve_lasso(&g, &m, 1.0).unwrap();
        assert!((fit.theta[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn lasso_full_shrinkage_at_large_penalty() {
        let g = gram_of(Array2::eye(2));
        let m = moments_of(array![0.3, -0.2]);
        let fit = solve_lasso(&g, &m, 0.6).unwrap();
        assert_eq!(fit.theta, array![0.0, 0.0]);
    }

    #[test]
    fn lasso_matches_proximal_gradient_oracle() {
        // Independent ISTA oracle run to machine-level tolerance.
        let g = gram_of(array![[1.0, 0.6], [0.6, 1.0]]);
        let m = moments_of(array![1.0, 0.2]);
        let l1 = 0.3;
        let fit = solve_lasso(&g, &m, l1).unwrap();

        let lipschitz = 2.0 * 1.6; // 2 * sigma_max for this matrix
        let eta = 1.0 / lipschitz;
        let mut theta = array![0.0, 0.0];
        for _ in 0..1_000_000 {
            let grad = &g.values.dot(&theta) * 2.0 - &(&m.values * 2.0);
            let next = Array1::from_shape_fn(2, |j| {
                soft_threshold(theta[j] - eta * grad[j], eta * l1)
            });
            let delta = (&next - &theta).iter().map(|v| v.abs()).fold(0.0f64, f64::max);
            theta = next;
            if delta < 1e-13 {
                break;
            }
        }
        for j in 0..2 {
            assert!(
                (fit.theta[j] - theta[j]).abs() < 1e-8,
                "coordinate {j}: {} vs {}",
                fit.theta[j],
                theta[j]
            );
        }
    }

    #[test]
    fn lasso_rejects_zero_diagonal() {
        let g = gram_of(array![[1.0, 0.0], [0.0, 0.0]]);
        let m = moments_of(array![1.0, 1.0]);
        match solve_lasso(&g, &m, 0.1) {
            Err(RieszError::DegenerateColumn(j)) => assert_eq!(j, 1),
            other => panic!("expected DegenerateColumn, got {other:?}"),
        }
    }

    #[test]
    fn rayleigh_scalar_case() {
        let g = gram_of(array![[1.0]]);
        let m = moments_of(array![2.0]);
        let fit = solve_rayleigh(&g, &m, 0.0).unwrap();
        assert!((fit.theta[0] - 2.0).abs() < 1e-12);
        assert!((fit.objective_value - 4.0).abs() < 1e-12);
        assert!((fit.gnorm_sq - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rayleigh_equals_riesz_loss_unregularized() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (g, m) = random_instance(80, 6, 1e6, &mut rng);
            let a = solve_riesz_loss(&g, &m, 0.0).unwrap();
            let b = solve_rayleigh(&g, &m, 0.0).unwrap();
            let report = equivalence_report(&a, &b).unwrap();
            assert!(report.max_rel_diff < 1e-10, "rel diff {}", report.max_rel_diff);
        }
    }

    #[test]
    fn rayleigh_norm_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let (g, m) = random_instance(80, 6, 1e6, &mut rng);
            let fit = solve_rayleigh(&g, &m, 0.0).unwrap();
            // theta' G theta should equal the maximized quotient L' G^-1 L,
            // computed here through an independent pseudoinverse route.
            let quotient = m.values.dot(&pinv_solve(&g.values, &m.values).unwrap());
            let rel = (fit.gnorm_sq - quotient).abs() / quotient.abs().max(1e-300);
            assert!(rel < 1e-8, "relative identity error {rel}");
        }
    }

    #[test]
    fn rayleigh_rejects_zero_moments() {
        let g = gram_of(Array2::eye(2));
        let m = moments_of(array![0.0, 0.0]);
        assert!(matches!(
            solve_rayleigh(&g, &m, 0.0),
            Err(RieszError::DegenerateFunctional)
        ));
    }

    #[test]
    fn penalized_rayleigh_direction_stays_on_ellipsoid() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (g, m) = random_instance(100, 5, 1e6, &mut rng);
        let (u, iters, _) = rayleigh_l1_direction(&g, &m, 0.05).unwrap();
        let q = u.dot(&g.values.dot(&u));
        assert!((q - 1.0).abs() < 1e-8, "constraint violation {}", (q - 1.0).abs());
        assert!(iters >= 1);

        // The representer scaling carries the constraint into the identity
        // theta' G theta == theta' L.
        let fit = solve_rayleigh(&g, &m, 0.05).unwrap();
        let rel = (fit.gnorm_sq - fit.theta.dot(&m.values)).abs() / fit.gnorm_sq.max(1e-300);
        assert!(rel < 1e-8);
    }

    #[test]
    fn minnorm_hand_computed_rank_one() {
        let g = gram_of(array![[1.0, 1.0], [1.0, 1.0]]);
        let m = moments_of(array![1.0, 1.0]);
        let fit = minnorm_pinv_solve(&g, &m).unwrap();
        assert!((fit.theta[0] - 0.5).abs() < 1e-12);
        assert!((fit.theta[1] - 0.5).abs() < 1e-12);
        assert!(fit.used_min_norm);
    }

    #[test]
    fn minnorm_equals_solve_on_invertible_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let (g, m) = random_instance(50, 4, 1e6, &mut rng);
        let a = solve_riesz_loss(&g, &m, 0.0).unwrap();
        let b = minnorm_pinv_solve(&g, &m).unwrap();
        for j in 0..4 {
            assert!((a.theta[j] - b.theta[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn minnorm_solution_is_orthogonal_to_nullspace() {
        // d = 6 > n = 3 forces rank deficiency.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let phi = Array2::from_shape_fn((3, 6), |_| StandardNormal.sample(&mut rng));
        let g = crate::sieve::gram(&FeatureMatrix { values: phi });
        let m = moments_of(Array1::from_shape_fn(6, |_| StandardNormal.sample(&mut rng)));
        let fit = minnorm_pinv_solve(&g, &m).unwrap();
        let nullspace = gram_nullspace(&g).unwrap();
        assert_eq!(nullspace.ncols(), 3);
        let theta_norm = fit.theta.dot(&fit.theta).sqrt();
        for k in 0..nullspace.ncols() {
            let v = nullspace.column(k);
            let inner = fit.theta.dot(&v).abs();
            assert!(inner <= 1e-10 * theta_norm.max(1.0), "null direction {k}");
            // Any null-space perturbation strictly increases the norm.
            for t in [-1.0, -0.1, 0.1, 1.0] {
                let perturbed = &fit.theta + &(&v * t);
                assert!(perturbed.dot(&perturbed).sqrt() > theta_norm);
            }
        }
    }

    #[test]
    fn equivalence_report_on_identical_fits_is_zero() {
        let g = gram_of(Array2::eye(2));
        let m = moments_of(array![1.0, 2.0]);
        let fit = solve_riesz_loss(&g, &m, 0.0).unwrap();
        let report = equivalence_report(&fit, &fit.clone()).unwrap();
        assert_eq!(report.max_abs_diff, 0.0);
        assert_eq!(report.max_rel_diff, 0.0);
    }

    #[test]
    fn mismatched_dimensions_are_shape_errors() {
        let g = gram_of(Array2::eye(2));
        let m = moments_of(array![1.0, 2.0, 3.0]);
        assert!(matches!(
            solve_riesz_loss(&g, &m, 0.0),
            Err(RieszError::Shape(_))
        ));
        let m2 = moments_of(array![f64::NAN, 0.0]);
        assert!(matches!(
            solve_riesz_loss(&g, &m2, 0.0),
            Err(RieszError::NonFinite(_))
        ));
    }

    #[test]
    fn ridge_matches_direct_inverse_across_penalties() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let (g, m) = random_instance(60, 5, 1e6, &mut rng);
        for l2 in [1e-3, 1e-1, 1.0] {
            let fit = solve_riesz_loss(&g, &m, l2).unwrap();
            let reference = pinv_solve(&g.ridged(l2).values, &m.values).unwrap();
            for j in 0..5 {
                let denom = reference[j].abs().max(1e-12);
                assert!((fit.theta[j] - reference[j]).abs() / denom < 1e-8);
            }
        }
    }

    proptest! {
        #[test]
        fn lasso_satisfies_subgradient_conditions(seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (g, m) = random_instance(40, 4, 1e6, &mut rng);
            let l1 = 0.2;
            let fit = solve_lasso(&g, &m, l1).unwrap();
            let residual = &g.values.dot(&fit.theta) * 2.0 - &(&m.values * 2.0);
            for j in 0..4 {
                if fit.theta[j] == 0.0 {
                    prop_assert!(residual[j].abs() <= l1 + 1e-7);
                } else {
                    prop_assert!((residual[j] + l1 * fit.theta[j].signum()).abs() <= 1e-7);
                }
            }
        }
    }
}
