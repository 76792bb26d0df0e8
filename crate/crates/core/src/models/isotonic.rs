use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clip bound applied to every calibrated probability.
pub const EPSILON: f64 = 1e-6;

/// Weighted least-squares nondecreasing fit of `values` (pool adjacent
/// violators). Inputs are assumed sorted by their abscissa.
pub fn pava(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // blocks of (mean, weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        let mut block = (v, w, 1usize);
        while let Some(&(m, bw, len)) = blocks.last() {
            if m <= block.0 {
                break;
            }
            blocks.pop();
            let total = bw + block.1;
            let mean = if total > 0.0 {
                (m * bw + block.0 * block.1) / total
            } else {
                0.5 * (m + block.0)
            };
            block = (mean, total, len + block.2);
        }
        blocks.push(block);
    }
    blocks
        .into_iter()
        .flat_map(|(m, _, len)| std::iter::repeat_n(m, len))
        .collect()
}

/// Monotone step/linear map from raw scores to one class probability.
///
/// Between breakpoints the prediction is linearly interpolated; outside
/// them it is constant. All stored values lie in `[EPSILON, 1 - EPSILON]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicRegression {
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
}

impl IsotonicRegression {
    pub fn constant(value: f64) -> Self {
        Self {
            thresholds: vec![0.0],
            values: vec![clip(value)],
        }
    }

    /// Fit on `(score, target)` pairs. Identical scores are pooled first;
    /// a single distinct score yields a constant calibrator at the weighted
    /// target mean.
    pub fn fit(scores: &[f64], targets: &[f64], weights: &[f64]) -> Result<Self> {
        if scores.len() != targets.len() || scores.len() != weights.len() {
            return Err(Error::Dimension {
                expected: scores.len(),
                found: targets.len().min(weights.len()),
            });
        }
        let mut pairs: Vec<(f64, f64, f64)> = scores
            .iter()
            .zip(targets)
            .zip(weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|((&s, &t), &w)| (s, t, w))
            .collect();
        if pairs.is_empty() {
            return Err(Error::NoEffectiveData);
        }
        if pairs.iter().any(|(s, t, w)| !(s.is_finite() && t.is_finite() && w.is_finite())) {
            return Err(Error::NonFinite("isotonic input".into()));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        let mut ws: Vec<f64> = Vec::new();
        for (s, t, w) in pairs {
            match xs.last() {
                Some(&last) if last == s => {
                    let k = ys.len() - 1;
                    let total = ws[k] + w;
                    ys[k] = (ys[k] * ws[k] + t * w) / total;
                    ws[k] = total;
                }
                _ => {
                    xs.push(s);
                    ys.push(t);
                    ws.push(w);
                }
            }
        }
        if xs.len() == 1 {
            return Ok(Self {
                thresholds: xs,
                values: vec![clip(ys[0])],
            });
        }

        let fitted: Vec<f64> = pava(&ys, &ws).into_iter().map(clip).collect();
        // keep the two ends of every constant run; interior points add nothing
        let mut thresholds = Vec::new();
        let mut values = Vec::new();
        for i in 0..xs.len() {
            let same_prev = i > 0 && fitted[i - 1] == fitted[i];
            let same_next = i + 1 < xs.len() && fitted[i + 1] == fitted[i];
            if !(same_prev && same_next) {
                thresholds.push(xs[i]);
                values.push(fitted[i]);
            }
        }
        Ok(Self { thresholds, values })
    }

    pub fn predict(&self, score: f64) -> f64 {
        let t = &self.thresholds;
        let n = t.len();
        if n == 1 || score <= t[0] || score.is_nan() {
            return self.values[0];
        }
        if score >= t[n - 1] {
            return self.values[n - 1];
        }
        // first threshold strictly greater than score
        let hi = t.partition_point(|&x| x <= score);
        let lo = hi - 1;
        let (x0, x1) = (t[lo], t[hi]);
        let (y0, y1) = (self.values[lo], self.values[hi]);
        clip(y0 + (y1 - y0) * (score - x0) / (x1 - x0))
    }
}

/// Weighted isotonic fit of one class calibrator.
pub fn isotonic_fit(scores: &[f64], targets: &[f64], weights: &[f64]) -> Result<IsotonicRegression> {
    IsotonicRegression::fit(scores, targets, weights)
}

pub(crate) fn clip(p: f64) -> f64 {
    p.clamp(EPSILON, 1.0 - EPSILON)
}
