//! A small multilayer perceptron function class with two trainers: plain
//! quadratic-loss minimization and quotient maximization under a unit
//! empirical-second-moment constraint, enforced by normalizing the network
//! output inside the objective and differentiating through the
//! normalization.
//!
//! Training is full-batch gradient descent/ascent, single-threaded and
//! deterministic given the init seed. The parameters returned are the best
//! seen over the run, so the final objective never falls behind the
//! initialization.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Result, RieszError};
use crate::functional::FunctionalSpec;

/// Network architecture: tanh hidden layers and a linear scalar output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub activation: Activation,
    pub init_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Tanh,
}

impl MlpConfig {
    /// Defaults: two tanh layers of width 32.
    pub fn new(input_dim: usize, init_seed: u64) -> Self {
        Self {
            input_dim,
            hidden_widths: vec![32, 32],
            activation: Activation::Tanh,
            init_seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(RieszError::Config("input_dim must be at least 1".into()));
        }
        if self.hidden_widths.iter().any(|&w| w == 0) {
            return Err(RieszError::Config(
                "hidden widths must all be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Full-batch training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Stop when the objective has moved less than this over 20 epochs.
    pub tol: f64,
    /// Guards the normalization denominator `sqrt(E[f^2] + norm_epsilon)`.
    pub norm_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            max_epochs: 2000,
            tol: 1e-9,
            norm_epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(RieszError::Config("learning_rate must be positive".into()));
        }
        if self.max_epochs == 0 {
            return Err(RieszError::Config("max_epochs must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(RieszError::Config("tol must be positive".into()));
        }
        if !(self.norm_epsilon > 0.0) {
            return Err(RieszError::Config("norm_epsilon must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainerKind {
    RieszLoss,
    ConstrainedRayleigh,
}

/// Feed-forward network parameters. `weights[l]` maps layer `l` inputs to its
/// outputs (shape `in x out`); the final layer is linear with a single output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    #[serde(with = "crate::serde_util::vec_array2")]
    weights: Vec<Array2<f64>>,
    #[serde(with = "crate::serde_util::vec_array1")]
    biases: Vec<Array1<f64>>,
}

impl Mlp {
    /// Seeded initialization: weights `N(0, 1/sqrt(fan_in))`, zero biases,
    /// drawn layer by layer in row-major order.
    pub fn init(config: &MlpConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut dims = vec![config.input_dim];
        dims.extend_from_slice(&config.hidden_widths);
        dims.push(1);
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for l in 0..dims.len() - 1 {
            let scale = 1.0 / (dims[l] as f64).sqrt();
            let w = Array2::from_shape_fn((dims[l], dims[l + 1]), |_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            });
            weights.push(w);
            biases.push(Array1::zeros(dims[l + 1]));
        }
        Ok(Self { weights, biases })
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    fn layer_count(&self) -> usize {
        self.weights.len()
    }

    /// Hidden-layer activations and the scalar outputs for one batch, kept
    /// so backpropagation does not redo the forward pass.
    fn forward_cache(&self, inputs: &Array2<f64>) -> ForwardCache {
        let last = self.layer_count() - 1;
        let mut hidden: Vec<Array2<f64>> = Vec::with_capacity(last);
        for l in 0..last {
            let prev: &Array2<f64> = if l == 0 { inputs } else { &hidden[l - 1] };
            let z = prev.dot(&self.weights[l]) + &self.biases[l];
            hidden.push(z.mapv_into(f64::tanh));
        }
        let prev: &Array2<f64> = if last == 0 { inputs } else { &hidden[last - 1] };
        let out = prev.dot(&self.weights[last]) + &self.biases[last];
        ForwardCache {
            hidden,
            output: out.column(0).to_owned(),
        }
    }

    /// Network outputs for a batch of inputs.
    pub fn forward(&self, inputs: &Array2<f64>) -> Array1<f64> {
        self.forward_cache(inputs).output
    }

    /// Gradient of `sum_i c_i f(x_i)` with respect to every parameter, using
    /// the activations cached by [`Mlp::forward_cache`] on the same inputs.
    fn backprop_cached(
        &self,
        inputs: &Array2<f64>,
        cache: &ForwardCache,
        out_weights: &Array1<f64>,
    ) -> MlpGrads {
        let last = self.layer_count() - 1;
        let mut grads = MlpGrads::zeros_like(self);

        // Output layer: linear, so its delta is the weight vector itself.
        let c = out_weights.view().insert_axis(ndarray::Axis(1)).to_owned();
        let last_input: &Array2<f64> = if last == 0 {
            inputs
        } else {
            &cache.hidden[last - 1]
        };
        grads.weights[last] = last_input.t().dot(&c);
        grads.biases[last][0] = out_weights.sum();

        let mut delta = c.dot(&self.weights[last].t());
        for l in (0..last).rev() {
            // Through tanh: a' = 1 - a^2.
            delta.zip_mut_with(&cache.hidden[l], |d, a| *d *= 1.0 - a * a);
            let prev: &Array2<f64> = if l == 0 { inputs } else { &cache.hidden[l - 1] };
            grads.weights[l] = prev.t().dot(&delta);
            grads.biases[l] = delta.sum_axis(ndarray::Axis(0));
            if l > 0 {
                delta = delta.dot(&self.weights[l].t());
            }
        }
        grads
    }

    fn apply_step(&mut self, grads: &MlpGrads, scale: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            w.zip_mut_with(g, |w, g| *w += scale * g);
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.biases) {
            b.zip_mut_with(g, |b, g| *b += scale * g);
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Flatten parameters layer by layer (weights row-major, then biases).
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(RieszError::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut k = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for v in w.iter_mut() {
                *v = flat[k];
                k += 1;
            }
            for v in b.iter_mut() {
                *v = flat[k];
                k += 1;
            }
        }
        Ok(())
    }
}

struct ForwardCache {
    hidden: Vec<Array2<f64>>,
    output: Array1<f64>,
}

/// Parameter gradients with the same shapes as [`Mlp`].
#[derive(Debug, Clone)]
pub struct MlpGrads {
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

impl MlpGrads {
    fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            weights: mlp.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: mlp.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    fn add_scaled(&mut self, other: &MlpGrads, scale: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.zip_mut_with(b, |a, b| *a += scale * b);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.zip_mut_with(b, |a, b| *a += scale * b);
        }
    }

    /// Flattened in the same order as [`Mlp::params_flat`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }
}

/// Input batches an objective needs: the observed model inputs for the
/// second-moment term, and the weighted counterfactual/auxiliary batches
/// whose weighted output sums form the empirical moment.
#[derive(Debug, Clone)]
pub struct ObjectiveBatches {
    observed: Array2<f64>,
    moment_parts: Vec<(Array2<f64>, f64)>,
}

impl ObjectiveBatches {
    pub fn new(data: &Dataset, spec: &FunctionalSpec) -> Result<Self> {
        spec.check_compatible(data)?;
        let observed = data.model_inputs();
        let moment_parts = match spec {
            FunctionalSpec::AteDifference => {
                let n = data.n() as f64;
                vec![
                    (data.inputs_at_arm(1.0)?, 1.0 / n),
                    (data.inputs_at_arm(0.0)?, -1.0 / n),
                ]
            }
            FunctionalSpec::ShiftMean => {
                let aux = data.aux_sample().expect("checked above").clone();
                let m = aux.nrows() as f64;
                vec![(aux, 1.0 / m)]
            }
        };
        Ok(Self {
            observed,
            moment_parts,
        })
    }

    pub fn n(&self) -> usize {
        self.observed.nrows()
    }

    /// Empirical second moment of the network output on the observed sample.
    pub fn second_moment(&self, mlp: &Mlp) -> f64 {
        let f = mlp.forward(&self.observed);
        f.dot(&f) / self.n() as f64
    }

    /// Empirical moment of the network under the functional.
    pub fn moment(&self, mlp: &Mlp) -> f64 {
        self.moment_parts
            .iter()
            .map(|(x, w)| w * mlp.forward(x).sum())
            .sum()
    }

    /// The quadratic loss `E[f^2] - 2 E[m(f)]`.
    pub fn riesz_loss_value(&self, mlp: &Mlp) -> f64 {
        self.second_moment(mlp) - 2.0 * self.moment(mlp)
    }

    pub fn riesz_loss_grad(&self, mlp: &Mlp) -> MlpGrads {
        self.riesz_loss_value_grad(mlp).1
    }

    pub fn riesz_loss_value_grad(&self, mlp: &Mlp) -> (f64, MlpGrads) {
        let n = self.n() as f64;
        let cache = mlp.forward_cache(&self.observed);
        let sq = cache.output.dot(&cache.output) / n;
        let mut grads = mlp.backprop_cached(&self.observed, &cache, &(&cache.output * (2.0 / n)));

        let mut value = sq;
        for (x, w) in &self.moment_parts {
            let part_cache = mlp.forward_cache(x);
            value -= 2.0 * w * part_cache.output.sum();
            let c = Array1::from_elem(x.nrows(), *w);
            let part = mlp.backprop_cached(x, &part_cache, &c);
            grads.add_scaled(&part, -2.0);
        }
        (value, grads)
    }

    /// The constrained quotient `E[m(f~)]^2` where `f~ = f / sqrt(E[f^2] + eps)`.
    /// By linearity of the moment this equals `E[m(f)]^2 / (E[f^2] + eps)`,
    /// which is what gets differentiated: the normalization is part of the
    /// objective, not a projection.
    pub fn rayleigh_value(&self, mlp: &Mlp, norm_epsilon: f64) -> f64 {
        let m = self.moment(mlp);
        m * m / (self.second_moment(mlp) + norm_epsilon)
    }

    pub fn rayleigh_grad(&self, mlp: &Mlp, norm_epsilon: f64) -> MlpGrads {
        self.rayleigh_value_grad(mlp, norm_epsilon).1
    }

    pub fn rayleigh_value_grad(&self, mlp: &Mlp, norm_epsilon: f64) -> (f64, MlpGrads) {
        let n = self.n() as f64;
        let obs_cache = mlp.forward_cache(&self.observed);
        let s = obs_cache.output.dot(&obs_cache.output) / n;
        let part_caches: Vec<ForwardCache> = self
            .moment_parts
            .iter()
            .map(|(x, _)| mlp.forward_cache(x))
            .collect();
        let m: f64 = self
            .moment_parts
            .iter()
            .zip(&part_caches)
            .map(|((_, w), cache)| w * cache.output.sum())
            .sum();
        let denom = s + norm_epsilon;
        let value = m * m / denom;

        // d/dp [ m^2 / (s + eps) ] = (2m/(s+eps)) dm - (m^2/(s+eps)^2) ds
        let mut grads = MlpGrads::zeros_like(mlp);
        for ((x, w), cache) in self.moment_parts.iter().zip(&part_caches) {
            let c = Array1::from_elem(x.nrows(), *w);
            let part = mlp.backprop_cached(x, cache, &c);
            grads.add_scaled(&part, 2.0 * m / denom);
        }
        let s_grad =
            mlp.backprop_cached(&self.observed, &obs_cache, &(&obs_cache.output * (2.0 / n)));
        grads.add_scaled(&s_grad, -(m * m) / (denom * denom));
        (value, grads)
    }
}

/// Fitted network plus the constants needed to turn raw outputs into
/// representer predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralRieszFit {
    pub params: Mlp,
    pub config: MlpConfig,
    pub trainer: TrainerKind,
    /// Recovered scale: 1 for the plain trainer, the empirical moment of the
    /// normalized network for the constrained trainer (may be negative).
    pub scale_c: f64,
    /// Normalization denominator `sqrt(E[f^2] + eps)` frozen from training;
    /// 1 for the plain trainer.
    pub norm_scale: f64,
    pub final_objective: f64,
    pub epochs_run: usize,
}

const STOP_WINDOW: usize = 20;

fn run_training<F>(
    mut mlp: Mlp,
    train: &TrainConfig,
    maximize: bool,
    value_grad: F,
) -> Result<(Mlp, f64, usize)>
where
    F: Fn(&Mlp) -> (f64, MlpGrads),
{
    let step_sign = if maximize { 1.0 } else { -1.0 };
    let better = |candidate: f64, incumbent: f64| {
        if maximize {
            candidate > incumbent
        } else {
            candidate < incumbent
        }
    };

    let mut best_value = if maximize {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    };
    let mut best_params = mlp.clone();
    let mut history: Vec<f64> = Vec::with_capacity(train.max_epochs + 1);
    let mut epochs_run = 0;

    for epoch in 0..=train.max_epochs {
        let (value, grads) = value_grad(&mlp);
        if !value.is_finite() {
            return Err(RieszError::Divergence(epoch));
        }
        if better(value, best_value) {
            best_value = value;
            best_params = mlp.clone();
        }
        history.push(value);
        let len = history.len();
        if len > STOP_WINDOW && (history[len - 1 - STOP_WINDOW] - value).abs() < train.tol {
            break;
        }
        if epoch == train.max_epochs {
            break;
        }
        mlp.apply_step(&grads, step_sign * train.learning_rate);
        epochs_run = epoch + 1;
    }
    Ok((best_params, best_value, epochs_run))
}

fn check_inputs(data: &Dataset, mlp: &MlpConfig, train: &TrainConfig) -> Result<()> {
    mlp.validate()?;
    train.validate()?;
    if mlp.input_dim != data.input_dim() {
        return Err(RieszError::Config(format!(
            "network input_dim {} does not match the dataset's model input dimension {}",
            mlp.input_dim,
            data.input_dim()
        )));
    }
    Ok(())
}

/// Minimize the quadratic loss `E[f^2] - 2 E[m(f)]` over the network class by
/// full-batch gradient descent.
pub fn train_riesz_loss(
    data: &Dataset,
    spec: &FunctionalSpec,
    mlp: &MlpConfig,
    train: &TrainConfig,
) -> Result<NeuralRieszFit> {
    check_inputs(data, mlp, train)?;
    let batches = ObjectiveBatches::new(data, spec)?;
    let net = Mlp::init(mlp)?;
    let (params, final_objective, epochs_run) =
        run_training(net, train, false, |m| batches.riesz_loss_value_grad(m))?;
    Ok(NeuralRieszFit {
        params,
        config: mlp.clone(),
        trainer: TrainerKind::RieszLoss,
        scale_c: 1.0,
        norm_scale: 1.0,
        final_objective,
        epochs_run,
    })
}

/// Maximize `E[m(f~)]^2` for the normalized network `f~`, ascending with
/// gradients taken through the normalization, then recover the representer
/// scale `c = E[m(f~)]` on the training sample.
pub fn train_rayleigh_constrained(
    data: &Dataset,
    spec: &FunctionalSpec,
    mlp: &MlpConfig,
    train: &TrainConfig,
) -> Result<NeuralRieszFit> {
    check_inputs(data, mlp, train)?;
    let batches = ObjectiveBatches::new(data, spec)?;
    let net = Mlp::init(mlp)?;

    let s0 = batches.second_moment(&net);
    if s0 < train.norm_epsilon {
        return Err(RieszError::DegenerateNetwork(s0));
    }

    let eps = train.norm_epsilon;
    let (params, final_objective, epochs_run) =
        run_training(net, train, true, |m| batches.rayleigh_value_grad(m, eps))?;

    let s = batches.second_moment(&params);
    let norm_scale = (s + eps).sqrt();
    let scale_c = batches.moment(&params) / norm_scale;
    Ok(NeuralRieszFit {
        params,
        config: mlp.clone(),
        trainer: TrainerKind::ConstrainedRayleigh,
        scale_c,
        norm_scale,
        final_objective,
        epochs_run,
    })
}

/// Representer predictions on a dataset's model inputs: raw outputs for the
/// plain trainer, `c * f / norm_scale` for the constrained trainer, with the
/// normalization constant frozen from training.
pub fn predict_alpha(fit: &NeuralRieszFit, data: &Dataset) -> Result<Array1<f64>> {
    let inputs = data.model_inputs();
    if inputs.ncols() != fit.params.input_dim() {
        return Err(RieszError::Shape(format!(
            "dataset model inputs have dimension {}, network expects {}",
            inputs.ncols(),
            fit.params.input_dim()
        )));
    }
    let f = fit.params.forward(&inputs);
    Ok(match fit.trainer {
        TrainerKind::RieszLoss => f,
        TrainerKind::ConstrainedRayleigh => f * (fit.scale_c / fit.norm_scale),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_ate_dgp, AteDgpConfig};
    use crate::functional::function_moment;

    fn tiny_ate(n: usize, seed: u64) -> Dataset {
        generate_ate_dgp(&AteDgpConfig {
            n,
            p: 1,
            tau: 1.0,
            propensity_coefs: vec![0.0],
            propensity_clip: 0.05,
            outcome_coefs: vec![1.0],
            noise_sd: 0.5,
            seed,
        })
        .unwrap()
    }

    fn tiny_mlp(input_dim: usize, widths: Vec<usize>, seed: u64) -> MlpConfig {
        MlpConfig {
            input_dim,
            hidden_widths: widths,
            activation: Activation::Tanh,
            init_seed: seed,
        }
    }

    fn finite_difference_grad<F: Fn(&Mlp) -> f64>(mlp: &Mlp, f: F, step: f64) -> Vec<f64> {
        let base = mlp.params_flat();
        let mut grad = vec![0.0; base.len()];
        let mut probe = mlp.clone();
        for k in 0..base.len() {
            let mut plus = base.clone();
            plus[k] += step;
            probe.set_params_flat(&plus).unwrap();
            let up = f(&probe);
            let mut minus = base.clone();
            minus[k] -= step;
            probe.set_params_flat(&minus).unwrap();
            let down = f(&probe);
            grad[k] = (up - down) / (2.0 * step);
        }
        grad
    }

    fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
        let scale = numeric
            .iter()
            .map(|v| v.abs())
            .fold(0.0f64, f64::max)
            .max(1e-12);
        analytic
            .iter()
            .zip(numeric)
            .map(|(a, n)| (a - n).abs())
            .fold(0.0f64, f64::max)
            / scale
    }

    #[test]
    fn riesz_loss_gradient_matches_finite_differences() {
        let data = tiny_ate(10, 1);
        let batches = ObjectiveBatches::new(&data, &FunctionalSpec::AteDifference).unwrap();
        let mlp = Mlp::init(&tiny_mlp(2, vec![3], 5)).unwrap();
        let analytic = batches.riesz_loss_grad(&mlp).flat();
        let numeric =
            finite_difference_grad(&mlp, |m| batches.riesz_loss_value(m), 1e-5);
        let err = max_rel_err(&analytic, &numeric);
        assert!(err <= 1e-4, "gradient error {err}");
    }

    #[test]
    fn rayleigh_gradient_matches_finite_differences() {
        let data = tiny_ate(10, 2);
        let batches = ObjectiveBatches::new(&data, &FunctionalSpec::AteDifference).unwrap();
        let mlp = Mlp::init(&tiny_mlp(2, vec![3], 6)).unwrap();
        let eps = 1e-8;
        let analytic = batches.rayleigh_grad(&mlp, eps).flat();
        let numeric =
            finite_difference_grad(&mlp, |m| batches.rayleigh_value(m, eps), 1e-5);
        let err = max_rel_err(&analytic, &numeric);
        assert!(err <= 1e-4, "gradient error {err}");
    }

    #[test]
    fn trained_riesz_loss_is_nonpositive() {
        let data = tiny_ate(200, 3);
        let fit = train_riesz_loss(
            &data,
            &FunctionalSpec::AteDifference,
            &tiny_mlp(2, vec![8], 7),
            &TrainConfig {
                learning_rate: 0.05,
                max_epochs: 500,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        assert!(fit.final_objective <= 0.0, "loss {}", fit.final_objective);
        assert!(fit.epochs_run >= 1);
    }

    #[test]
    fn riesz_loss_identity_from_predictions() {
        let data = tiny_ate(150, 4);
        let spec = FunctionalSpec::AteDifference;
        let fit = train_riesz_loss(
            &data,
            &spec,
            &tiny_mlp(2, vec![4], 8),
            &TrainConfig {
                max_epochs: 300,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let alpha = predict_alpha(&fit, &data).unwrap();
        let sq = alpha.dot(&alpha) / data.n() as f64;
        let params = fit.params.clone();
        let m = function_moment(&data, &spec, move |x| {
            params.forward(&x.to_owned().insert_axis(ndarray::Axis(0)))[0]
        })
        .unwrap();
        assert!(
            (sq - 2.0 * m - fit.final_objective).abs() < 1e-8,
            "identity residual {}",
            (sq - 2.0 * m - fit.final_objective).abs()
        );
    }

    #[test]
    fn constrained_trainer_normalizes_and_ascends() {
        let data = tiny_ate(200, 5);
        let spec = FunctionalSpec::AteDifference;
        let mlp_cfg = tiny_mlp(2, vec![8], 9);
        let train = TrainConfig {
            learning_rate: 0.05,
            max_epochs: 500,
            ..TrainConfig::default()
        };
        let batches = ObjectiveBatches::new(&data, &spec).unwrap();
        let init_value = batches.rayleigh_value(&Mlp::init(&mlp_cfg).unwrap(), train.norm_epsilon);

        let fit = train_rayleigh_constrained(&data, &spec, &mlp_cfg, &train).unwrap();
        assert!(fit.final_objective >= init_value);

        // The normalized network has unit empirical second moment.
        let f = fit.params.forward(&data.model_inputs());
        let alpha_tilde = &f / fit.norm_scale;
        let second = alpha_tilde.dot(&alpha_tilde) / data.n() as f64;
        assert!(
            (second - 1.0).abs() <= 1e-6,
            "normalized second moment {second}"
        );
    }

    #[test]
    fn rayleigh_scale_is_invariant_to_output_rescaling() {
        let data = tiny_ate(150, 6);
        let spec = FunctionalSpec::AteDifference;
        let train = TrainConfig {
            max_epochs: 200,
            ..TrainConfig::default()
        };
        let fit = train_rayleigh_constrained(&data, &spec, &tiny_mlp(2, vec![4], 10), &train)
            .unwrap();
        let alpha = predict_alpha(&fit, &data).unwrap();

        // Double the (linear) output layer: f -> 2f. Rebuilding the scale
        // constants on the training sample must leave c * f~ unchanged.
        let mut doubled = fit.params.clone();
        let last = doubled.weights.len() - 1;
        doubled.weights[last] *= 2.0;
        doubled.biases[last] *= 2.0;
        let batches = ObjectiveBatches::new(&data, &spec).unwrap();
        let s = batches.second_moment(&doubled);
        let norm_scale = (s + train.norm_epsilon).sqrt();
        let scale_c = batches.moment(&doubled) / norm_scale;
        let doubled_fit = NeuralRieszFit {
            params: doubled,
            norm_scale,
            scale_c,
            ..fit.clone()
        };
        let alpha2 = predict_alpha(&doubled_fit, &data).unwrap();
        for i in 0..data.n() {
            assert!(
                (alpha[i] - alpha2[i]).abs() <= 1e-6,
                "prediction {i}: {} vs {}",
                alpha[i],
                alpha2[i]
            );
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = tiny_ate(100, 7);
        let cfg = tiny_mlp(2, vec![4, 3], 11);
        let train = TrainConfig {
            max_epochs: 100,
            ..TrainConfig::default()
        };
        let a = train_riesz_loss(&data, &FunctionalSpec::AteDifference, &cfg, &train).unwrap();
        let b = train_riesz_loss(&data, &FunctionalSpec::AteDifference, &cfg, &train).unwrap();
        assert_eq!(a.params.params_flat(), b.params.params_flat());
        assert_eq!(a.final_objective, b.final_objective);
        assert_eq!(a.epochs_run, b.epochs_run);
    }

    #[test]
    fn zero_network_predicts_zero() {
        let data = tiny_ate(20, 8);
        let cfg = tiny_mlp(2, vec![3], 12);
        let mut net = Mlp::init(&cfg).unwrap();
        net.set_params_flat(&vec![0.0; net.param_count()]).unwrap();
        let fit = NeuralRieszFit {
            params: net,
            config: cfg,
            trainer: TrainerKind::RieszLoss,
            scale_c: 1.0,
            norm_scale: 1.0,
            final_objective: 0.0,
            epochs_run: 0,
        };
        let alpha = predict_alpha(&fit, &data).unwrap();
        assert!(alpha.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn zero_scale_constant_predicts_zero() {
        let data = tiny_ate(20, 9);
        let cfg = tiny_mlp(2, vec![3], 13);
        let fit = NeuralRieszFit {
            params: Mlp::init(&cfg).unwrap(),
            config: cfg,
            trainer: TrainerKind::ConstrainedRayleigh,
            scale_c: 0.0,
            norm_scale: 1.0,
            final_objective: 0.0,
            epochs_run: 0,
        };
        let alpha = predict_alpha(&fit, &data).unwrap();
        assert!(alpha.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn exploding_step_size_reports_divergence() {
        let data = tiny_ate(50, 10);
        let out = train_riesz_loss(
            &data,
            &FunctionalSpec::AteDifference,
            &tiny_mlp(2, vec![4], 14),
            &TrainConfig {
                learning_rate: 1e8,
                max_epochs: 400,
                ..TrainConfig::default()
            },
        );
        match out {
            Err(RieszError::Divergence(epoch)) => assert!(epoch > 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn input_dimension_mismatch_is_rejected() {
        let data = tiny_ate(20, 11);
        let err = train_riesz_loss(
            &data,
            &FunctionalSpec::AteDifference,
            &tiny_mlp(5, vec![3], 15),
            &TrainConfig::default(),
        );
        assert!(matches!(err, Err(RieszError::Config(_))));

        let fit = train_riesz_loss(
            &data,
            &FunctionalSpec::AteDifference,
            &tiny_mlp(2, vec![3], 15),
            &TrainConfig {
                max_epochs: 5,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let other = crate::data::Dataset::new(Array2::ones((4, 3))).unwrap();
        assert!(matches!(
            predict_alpha(&fit, &other),
            Err(RieszError::Shape(_))
        ));
    }
}
