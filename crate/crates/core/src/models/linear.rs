use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training loss of a linear model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Multinomial cross-entropy on softmax scores.
    Logistic,
    /// Symmetric loss `1 - y s` on the binary margin, `y ∈ {-1, +1}`.
    Unhinged,
}

/// `K` affine scorers, one per class.
///
/// Binary unhinged models keep antisymmetric rows, so the margin is
/// `s_1 = -s_0`. Logistic models started from zero keep the same symmetry
/// because the two softmax gradients are opposite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub loss: LossKind,
}

impl LinearModel {
    pub fn zeros(n_classes: usize, n_features: usize, loss: LossKind) -> Self {
        Self {
            weights: Array2::zeros((n_classes, n_features)),
            bias: Array1::zeros(n_classes),
            loss,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.weights.ncols()
    }

    /// Raw scores `W x + b`.
    pub fn score(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.n_features() {
            return Err(Error::Dimension {
                expected: self.n_features(),
                found: x.len(),
            });
        }
        Ok(self.weights.dot(&x) + &self.bias)
    }

    pub(crate) fn score_into(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let w = self.weights.row(k);
            let w = w.as_slice().expect("standard layout");
            *o = self.bias[k] + dot(w, x);
        }
    }

    /// Binary margin `(s_1 - s_0) / 2`.
    pub fn margin(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        if self.n_classes() != 2 {
            return Err(Error::Unsupported("margin of a non-binary model".into()));
        }
        let s = self.score(x)?;
        Ok(0.5 * (s[1] - s[0]))
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }

    /// Squared Frobenius norm of the weights (the bias is not penalised).
    pub fn weight_norm_sq(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `L(s, y) = 1 - y s` for `y ∈ {-1, +1}`.
pub fn unhinged_loss(margin: f64, y: f64) -> f64 {
    1.0 - y * margin
}

/// `∂L/∂s = -y`.
pub fn unhinged_gradient(_margin: f64, y: f64) -> f64 {
    -y
}

/// Class-1 encoded as `+1`, anything else as `-1`.
pub fn sign_label(class: usize) -> f64 {
    if class == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Softmax in place; returns `log Σ exp(s)`.
pub(crate) fn softmax_into(scores: &[f64], out: &mut [f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &s) in out.iter_mut().zip(scores) {
        *o = (s - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    max + sum.ln()
}

/// Per-example loss used during training.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    Loss(LossKind),
    /// Logistic loss on trusted rows and `-log (Cᵀ softmax(s))_y` on rows
    /// flagged in `corrected`, with `C` a row-stochastic transition matrix.
    Corrected {
        transition: &'a Array2<f64>,
        corrected: &'a [bool],
    },
}

impl Objective<'_> {
    pub fn loss_kind(&self) -> LossKind {
        match self {
            Objective::Loss(kind) => *kind,
            Objective::Corrected { .. } => LossKind::Logistic,
        }
    }

    /// Loss of example `row` (global dataset index) given its scores, with
    /// the gradient w.r.t. the scores written into `grad`. `probs` is scratch.
    pub(crate) fn example(
        &self,
        row: usize,
        scores: &[f64],
        y: usize,
        grad: &mut [f64],
        probs: &mut [f64],
    ) -> f64 {
        match self {
            Objective::Loss(LossKind::Logistic) => logistic_example(scores, y, grad, probs),
            Objective::Loss(LossKind::Unhinged) => {
                let m = 0.5 * (scores[1] - scores[0]);
                let t = sign_label(y);
                let g = unhinged_gradient(m, t);
                grad[1] = 0.5 * g;
                grad[0] = -0.5 * g;
                unhinged_loss(m, t)
            }
            Objective::Corrected {
                transition,
                corrected,
            } => {
                if !corrected[row] {
                    return logistic_example(scores, y, grad, probs);
                }
                softmax_into(scores, probs);
                let q_y: f64 = probs
                    .iter()
                    .enumerate()
                    .map(|(i, p)| transition[[i, y]] * p)
                    .sum::<f64>()
                    .max(f64::MIN_POSITIVE);
                for (k, g) in grad.iter_mut().enumerate() {
                    *g = probs[k] - transition[[k, y]] * probs[k] / q_y;
                }
                -q_y.ln()
            }
        }
    }
}

fn logistic_example(scores: &[f64], y: usize, grad: &mut [f64], probs: &mut [f64]) -> f64 {
    let lse = softmax_into(scores, probs);
    for (k, g) in grad.iter_mut().enumerate() {
        *g = probs[k] - if k == y { 1.0 } else { 0.0 };
    }
    lse - scores[y]
}
