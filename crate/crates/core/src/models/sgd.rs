use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::linear::{LinearModel, LossKind, Objective};
use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// Mini-batch SGD hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            weight_decay: 1e-6,
            epochs: 20,
            batch_size: 24,
            seed: 0,
        }
    }
}

impl SgdConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config("weight_decay must be >= 0".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

fn row_slice(data: &Dataset, i: usize) -> std::borrow::Cow<'_, [f64]> {
    let row = data.features.row(i);
    match row.to_slice() {
        Some(s) => std::borrow::Cow::Borrowed(s),
        None => std::borrow::Cow::Owned(row.to_vec()),
    }
}

/// Gradient of `(1/normalizer) Σ_{i ∈ rows} w_i L_i + weight_decay ‖W‖²`.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Value of the mini-batch objective
/// `(1/normalizer) Σ_{i ∈ rows} w_i L(f(x_i), y_i) + weight_decay ‖W‖²`.
pub fn batch_objective(
    model: &LinearModel,
    data: &Dataset,
    rows: &[usize],
    weights: &[f64],
    objective: &Objective<'_>,
    weight_decay: f64,
    normalizer: f64,
) -> f64 {
    let k = model.n_classes();
    let (mut scores, mut grad, mut probs) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    let mut total = 0.0;
    for &i in rows {
        let x = row_slice(data, i);
        model.score_into(&x, &mut scores);
        total += weights[i] * objective.example(i, &scores, data.labels[i], &mut grad, &mut probs);
    }
    total / normalizer + weight_decay * model.weight_norm_sq()
}

/// Analytic gradient of [`batch_objective`].
pub fn batch_gradient(
    model: &LinearModel,
    data: &Dataset,
    rows: &[usize],
    weights: &[f64],
    objective: &Objective<'_>,
    weight_decay: f64,
    normalizer: f64,
) -> Gradient {
    let mut g = Gradient {
        weights: Array2::zeros(model.weights.raw_dim()),
        bias: Array1::zeros(model.bias.raw_dim()),
    };
    let k = model.n_classes();
    let mut scratch = Scratch::new(k);
    accumulate(model, data, rows, weights, objective, &mut g, &mut scratch);
    g.weights /= normalizer;
    g.bias /= normalizer;
    g.weights.scaled_add(2.0 * weight_decay, &model.weights);
    g
}

struct Scratch {
    scores: Vec<f64>,
    grad: Vec<f64>,
    probs: Vec<f64>,
}

impl Scratch {
    fn new(k: usize) -> Self {
        Self {
            scores: vec![0.0; k],
            grad: vec![0.0; k],
            probs: vec![0.0; k],
        }
    }
}

/// Adds `Σ w_i ∂L_i/∂θ` into `g`.
fn accumulate(
    model: &LinearModel,
    data: &Dataset,
    rows: &[usize],
    weights: &[f64],
    objective: &Objective<'_>,
    g: &mut Gradient,
    s: &mut Scratch,
) {
    let gw = g.weights.as_slice_mut().expect("standard layout");
    let d = model.n_features();
    for &i in rows {
        let w = weights[i];
        let x = row_slice(data, i);
        model.score_into(&x, &mut s.scores);
        objective.example(i, &s.scores, data.labels[i], &mut s.grad, &mut s.probs);
        for (k, &gk) in s.grad.iter().enumerate() {
            let c = w * gk;
            if c == 0.0 {
                continue;
            }
            g.bias[k] += c;
            for (a, &xj) in gw[k * d..(k + 1) * d].iter_mut().zip(x.iter()) {
                *a += c * xj;
            }
        }
    }
}

fn check_inputs(data: &Dataset, weights: &[f64], loss: LossKind) -> Result<()> {
    if weights.len() != data.n_samples() {
        return Err(Error::Dimension {
            expected: data.n_samples(),
            found: weights.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::Config(format!(
            "sample weights must be finite and >= 0, found {w}"
        )));
    }
    if loss == LossKind::Unhinged && data.n_classes != 2 {
        return Err(Error::Unsupported(
            "the unhinged loss is defined for binary tasks only".into(),
        ));
    }
    Ok(())
}

/// Fit a linear model by shuffled mini-batch SGD on the rows of `data` listed
/// in `rows`. Rows with zero weight are dropped before shuffling, so they have
/// no effect at all on the result.
///
/// Each step uses `(1/batch_size) Σ_{i ∈ B} w_i ∇L_i + 2 weight_decay W`; the
/// shuffle stream is seeded from `config.seed` and reshuffled every epoch.
pub fn fit_rows(
    data: &Dataset,
    weights: &[f64],
    rows: &[usize],
    config: &SgdConfig,
    objective: &Objective<'_>,
) -> Result<LinearModel> {
    config.validate()?;
    let loss = objective.loss_kind();
    check_inputs(data, weights, loss)?;
    let mut active: Vec<usize> = rows.iter().copied().filter(|&i| weights[i] > 0.0).collect();
    if active.is_empty() {
        return Err(Error::NoEffectiveData);
    }
    for &i in &active {
        if data.features.row(i).iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature value in row {i}")));
        }
    }

    let mut model = LinearModel::zeros(data.n_classes, data.n_features(), loss);
    let mut rng = seed::rng(config.seed);
    let mut grad = Gradient {
        weights: Array2::zeros(model.weights.raw_dim()),
        bias: Array1::zeros(model.bias.raw_dim()),
    };
    let mut scratch = Scratch::new(data.n_classes);
    let step = config.learning_rate / config.batch_size as f64;
    let decay = 2.0 * config.weight_decay * config.learning_rate;
    for _ in 0..config.epochs {
        active.shuffle(&mut rng);
        for batch in active.chunks(config.batch_size) {
            grad.weights.fill(0.0);
            grad.bias.fill(0.0);
            accumulate(&model, data, batch, weights, objective, &mut grad, &mut scratch);
            if decay != 0.0 {
                model.weights *= 1.0 - decay;
            }
            model.weights.scaled_add(-step, &grad.weights);
            model.bias.scaled_add(-step, &grad.bias);
        }
    }
    if !model.is_finite() {
        return Err(Error::NonFinite("model parameters diverged".into()));
    }
    Ok(model)
}

/// Fit on every row of `data` with per-example weights.
pub fn sgd_fit(data: &Dataset, weights: &[f64], config: &SgdConfig, loss: LossKind) -> Result<LinearModel> {
    let rows: Vec<usize> = (0..data.n_samples()).collect();
    fit_rows(data, weights, &rows, config, &Objective::Loss(loss))
}
