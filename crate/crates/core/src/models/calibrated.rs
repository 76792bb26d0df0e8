use std::path::Path;

use log::warn;
use ndarray::ArrayView1;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::isotonic::{IsotonicRegression, EPSILON};
use super::linear::{LinearModel, LossKind, Objective};
use super::sgd::{fit_rows, SgdConfig};
use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// Number of cross-fitting folds used to collect out-of-fold calibration scores.
pub const CALIBRATION_FOLDS: usize = 3;

const FOLD_ASSIGNMENT: u64 = 0xF01D;

/// Anything that returns a probability vector over `K` classes.
pub trait ProbabilisticModel {
    fn n_classes(&self) -> usize;

    fn predict_proba(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>>;

    /// Most probable class; ties go to the lowest index.
    fn predict(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        Ok(argmax(&self.predict_proba(x)?))
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A linear scorer followed by one isotonic calibrator per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedModel {
    pub base: LinearModel,
    pub calibrators: Vec<IsotonicRegression>,
    pub epsilon: f64,
}

impl CalibratedModel {
    pub fn new(base: LinearModel, calibrators: Vec<IsotonicRegression>) -> Result<Self> {
        if calibrators.len() != base.n_classes() {
            return Err(Error::Dimension {
                expected: base.n_classes(),
                found: calibrators.len(),
            });
        }
        Ok(Self {
            base,
            calibrators,
            epsilon: EPSILON,
        })
    }

    /// Calibrate raw scores and renormalize into a probability vector.
    pub fn calibrate_scores(&self, scores: &[f64]) -> Vec<f64> {
        let raw: Vec<f64> = self
            .calibrators
            .iter()
            .zip(scores)
            .map(|(c, &s)| c.predict(s))
            .collect();
        normalize(raw, self.epsilon)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl ProbabilisticModel for CalibratedModel {
    fn n_classes(&self) -> usize {
        self.base.n_classes()
    }

    fn predict_proba(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        let scores = self.base.score(x)?;
        Ok(self.calibrate_scores(scores.as_slice().expect("contiguous scores")))
    }
}

/// Renormalize clipped class probabilities to sum to one while keeping every
/// entry in `[eps, 1 - eps]`. For two classes `p_0 = 1 - p_1` exactly.
pub(crate) fn normalize(mut c: Vec<f64>, eps: f64) -> Vec<f64> {
    if c.len() == 2 {
        let p1 = c[1] / (c[0] + c[1]);
        return vec![1.0 - p1, p1];
    }
    let mut fixed = vec![false; c.len()];
    loop {
        let free_mass: f64 = c.iter().zip(&fixed).filter(|(_, &f)| !f).map(|(v, _)| v).sum();
        let target = 1.0 - eps * fixed.iter().filter(|&&f| f).count() as f64;
        for (v, _) in c.iter_mut().zip(&fixed).filter(|(_, &f)| !f) {
            *v *= target / free_mass;
        }
        let mut changed = false;
        for (v, f) in c.iter_mut().zip(fixed.iter_mut()) {
            if !*f && *v < eps {
                *v = eps;
                *f = true;
                changed = true;
            }
        }
        if !changed {
            return c;
        }
    }
}

/// Stratified assignment of `rows` to folds.
fn assign_folds(data: &Dataset, rows: &[usize], seed: u64) -> Vec<Vec<usize>> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); data.n_classes];
    for &i in rows {
        by_class[data.labels[i]].push(i);
    }
    let mut rng = seed::rng(seed::derive_seed(seed, &[FOLD_ASSIGNMENT]));
    let mut folds = vec![Vec::new(); CALIBRATION_FOLDS];
    let mut next = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[next % CALIBRATION_FOLDS].push(i);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

/// Train a linear model and calibrate it by cross-fitting: out-of-fold
/// scores from three stratified folds feed one weighted isotonic calibrator
/// per class, then the base model is refit on all rows.
///
/// When a present class has fewer than three effective samples the
/// calibrators are fitted on in-sample scores of the final model instead.
pub fn fit_calibrated_with(
    data: &Dataset,
    weights: &[f64],
    config: &SgdConfig,
    objective: &Objective<'_>,
) -> Result<CalibratedModel> {
    if weights.len() != data.n_samples() {
        return Err(Error::Dimension {
            expected: data.n_samples(),
            found: weights.len(),
        });
    }
    let rows: Vec<usize> = (0..data.n_samples()).filter(|&i| weights[i] > 0.0).collect();
    if rows.is_empty() {
        return Err(Error::NoEffectiveData);
    }
    let mut counts = vec![0usize; data.n_classes];
    for &i in &rows {
        counts[data.labels[i]] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::DegenerateLabels(
            "calibration needs at least two classes with positive weight".into(),
        ));
    }

    let base = fit_rows(data, weights, &rows, config, objective)?;
    let k = data.n_classes;
    let mut scores: Vec<Vec<f64>> = vec![Vec::with_capacity(rows.len()); k];
    let mut targets: Vec<Vec<f64>> = vec![Vec::with_capacity(rows.len()); k];
    let mut sample_weights = Vec::with_capacity(rows.len());
    let mut collect = |model: &LinearModel, held_out: &[usize]| {
        let mut s = vec![0.0; k];
        for &i in held_out {
            let x = data.features.row(i);
            model.score_into(&x.to_vec(), &mut s);
            for c in 0..k {
                scores[c].push(s[c]);
                targets[c].push(if data.labels[i] == c { 1.0 } else { 0.0 });
            }
            sample_weights.push(weights[i]);
        }
    };

    if counts.iter().any(|&c| c > 0 && c < CALIBRATION_FOLDS) {
        warn!(
            "class counts {counts:?} too small for {CALIBRATION_FOLDS}-fold calibration; \
             calibrating on in-sample scores"
        );
        collect(&base, &rows);
    } else {
        let folds = assign_folds(data, &rows, config.seed);
        for (f, held_out) in folds.iter().enumerate() {
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, rows)| rows.iter().copied())
                .collect();
            let fold_config = config.with_seed(seed::derive_seed(config.seed, &[f as u64 + 1]));
            let model = fit_rows(data, weights, &train, &fold_config, objective)?;
            collect(&model, held_out);
        }
    }

    let calibrators = (0..k)
        .map(|c| IsotonicRegression::fit(&scores[c], &targets[c], &sample_weights))
        .collect::<Result<Vec<_>>>()?;
    CalibratedModel::new(base, calibrators)
}

pub fn fit_calibrated(
    data: &Dataset,
    weights: &[f64],
    config: &SgdConfig,
    loss: LossKind,
) -> Result<CalibratedModel> {
    fit_calibrated_with(data, weights, config, &Objective::Loss(loss))
}
