//! Learning procedures over a trusted/untrusted pair: importance
//! reweighting (IRBL), the GLC transition-matrix correction, a symmetric-loss
//! robust learner, and the trusted/mixed/untrusted baselines.

use std::fmt;
use std::str::FromStr;

use log::warn;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::datasets::{BiqualitySplit, Dataset};
use crate::error::{Error, Result};
use crate::models::{
    batch_objective, fit_calibrated, fit_calibrated_with, CalibratedModel, LinearModel, LossKind,
    Objective, ProbabilisticModel, SgdConfig,
};
use crate::seed;

const F_TRUSTED: u64 = 0x7;
const F_UNTRUSTED: u64 = 0x0;

/// Where a weight vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightSource {
    Unit,
    Irbl,
}

/// Per-example weights over `D_T ∪ D_U`, trusted rows first.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaWeights {
    pub values: Vec<f64>,
    pub n_trusted: usize,
    pub source: WeightSource,
}

impl BetaWeights {
    pub fn unit(n_trusted: usize, n_untrusted: usize) -> Self {
        Self {
            values: vec![1.0; n_trusted + n_untrusted],
            n_trusted,
            source: WeightSource::Unit,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn trusted(&self) -> &[f64] {
        &self.values[..self.n_trusted]
    }

    pub fn untrusted(&self) -> &[f64] {
        &self.values[self.n_trusted..]
    }
}

/// `C[i][j]` estimates the probability of observing untrusted label `j` for
/// an example whose true label is `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix(pub Array2<f64>);

impl TransitionMatrix {
    pub fn identity(k: usize) -> Self {
        Self(Array2::eye(k))
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    /// `Cᵀ p`: the untrusted label distribution implied by a trusted one.
    pub fn mix(&self, p: &[f64]) -> Vec<f64> {
        let k = self.0.nrows();
        (0..k)
            .map(|j| (0..k).map(|i| self.0[[i, j]] * p[i]).sum())
            .collect()
    }
}

fn check_vocabulary(trusted: &Dataset, untrusted: &Dataset) -> Result<()> {
    if trusted.n_features() != untrusted.n_features() {
        return Err(Error::Dimension {
            expected: trusted.n_features(),
            found: untrusted.n_features(),
        });
    }
    if trusted.n_classes != untrusted.n_classes {
        return Err(Error::Config("trusted and untrusted class vocabularies differ".into()));
    }
    Ok(())
}

fn require_all_classes(data: &Dataset, set: &'static str) -> Result<()> {
    if let Some(class) = data.class_counts().iter().position(|&c| c == 0) {
        return Err(Error::CannotEstimateConcept { class, set });
    }
    Ok(())
}

/// β̂ from two fitted models: `f_T(x)[y] / f_U(x)[y]` for untrusted rows, 1
/// for trusted rows.
pub fn beta_from_models(
    f_trusted: &dyn ProbabilisticModel,
    f_untrusted: &dyn ProbabilisticModel,
    trusted: &Dataset,
    untrusted: &Dataset,
) -> Result<BetaWeights> {
    let mut values = vec![1.0; trusted.n_samples()];
    values.reserve(untrusted.n_samples());
    for i in 0..untrusted.n_samples() {
        let x = untrusted.row(i);
        let y = untrusted.labels[i];
        let pt = f_trusted.predict_proba(x)?;
        let pu = f_untrusted.predict_proba(x)?;
        values.push(pt[y] / pu[y]);
    }
    Ok(BetaWeights {
        values,
        n_trusted: trusted.n_samples(),
        source: WeightSource::Irbl,
    })
}

/// Importance weights for every example of `D_T ∪ D_U`, estimated with one
/// calibrated model per dataset.
pub fn irbl_weights(trusted: &Dataset, untrusted: &Dataset, sgd: &SgdConfig) -> Result<BetaWeights> {
    check_vocabulary(trusted, untrusted)?;
    if trusted.is_empty() || untrusted.is_empty() {
        return Err(Error::EmptySubset("IRBL needs trusted and untrusted data".into()));
    }
    require_all_classes(trusted, "trusted")?;
    require_all_classes(untrusted, "untrusted")?;
    let f_u = fit_calibrated(
        untrusted,
        &vec![1.0; untrusted.n_samples()],
        &sgd.with_seed(seed::derive_seed(sgd.seed, &[F_UNTRUSTED])),
        LossKind::Logistic,
    )?;
    let f_t = fit_calibrated(
        trusted,
        &vec![1.0; trusted.n_samples()],
        &sgd.with_seed(seed::derive_seed(sgd.seed, &[F_TRUSTED])),
        LossKind::Logistic,
    )?;
    beta_from_models(&f_t, &f_u, trusted, untrusted)
}

/// Final IRBL model with the weights it was trained with.
#[derive(Debug, Clone)]
pub struct IrblFit {
    pub model: CalibratedModel,
    pub weights: BetaWeights,
}

/// Reweight the untrusted examples, then learn one calibrated model on
/// `D_T ∪ D_U`. With no untrusted data this is the trusted baseline.
pub fn irbl_fit(split: &BiqualitySplit, sgd: &SgdConfig) -> Result<IrblFit> {
    if split.untrusted.is_empty() {
        let weights = BetaWeights::unit(split.trusted.n_samples(), 0);
        let model = baseline_fit(split, Baseline::Trusted, sgd)?;
        return Ok(IrblFit { model, weights });
    }
    let weights = irbl_weights(&split.trusted, &split.untrusted, sgd)?;
    let pooled = split.pooled()?;
    let model = fit_calibrated(&pooled, weights.as_slice(), sgd, LossKind::Logistic)?;
    Ok(IrblFit { model, weights })
}

/// Row `i` is the mean of `f_U(x)` over trusted examples of class `i`; rows
/// without trusted support fall back to the identity row.
pub fn glc_estimate(trusted: &Dataset, f_untrusted: &dyn ProbabilisticModel) -> Result<TransitionMatrix> {
    if trusted.is_empty() {
        return Err(Error::EmptySubset("GLC needs trusted data".into()));
    }
    let k = trusted.n_classes;
    let mut c = Array2::zeros((k, k));
    let mut counts = vec![0usize; k];
    for i in 0..trusted.n_samples() {
        let y = trusted.labels[i];
        let p = f_untrusted.predict_proba(trusted.row(i))?;
        for (j, pj) in p.iter().enumerate() {
            c[[y, j]] += pj;
        }
        counts[y] += 1;
    }
    for (i, &n) in counts.iter().enumerate() {
        if n == 0 {
            warn!("class {i} has no trusted example; using the identity row");
            c[[i, i]] = 1.0;
        } else {
            for j in 0..k {
                c[[i, j]] /= n as f64;
            }
        }
    }
    Ok(TransitionMatrix(c))
}

#[derive(Debug, Clone)]
pub struct GlcFit {
    pub model: CalibratedModel,
    pub transition: TransitionMatrix,
}

/// Estimate `C` from a model of the untrusted concept, then learn with the
/// logistic loss on `D_T` and the `Cᵀ f(x)` corrected loss on `D_U`.
pub fn glc_fit(split: &BiqualitySplit, sgd: &SgdConfig) -> Result<GlcFit> {
    check_vocabulary(&split.trusted, &split.untrusted)?;
    if split.untrusted.is_empty() {
        let model = baseline_fit(split, Baseline::Trusted, sgd)?;
        return Ok(GlcFit {
            model,
            transition: TransitionMatrix::identity(split.trusted.n_classes),
        });
    }
    let f_u = fit_calibrated(
        &split.untrusted,
        &vec![1.0; split.untrusted.n_samples()],
        &sgd.with_seed(seed::derive_seed(sgd.seed, &[F_UNTRUSTED])),
        LossKind::Logistic,
    )?;
    let transition = glc_estimate(&split.trusted, &f_u)?;
    let model = glc_fit_with(split, &transition, sgd)?;
    Ok(GlcFit { model, transition })
}

/// Second GLC stage with a given transition matrix.
pub fn glc_fit_with(
    split: &BiqualitySplit,
    transition: &TransitionMatrix,
    sgd: &SgdConfig,
) -> Result<CalibratedModel> {
    let pooled = split.pooled()?;
    let corrected = untrusted_mask(split);
    let objective = Objective::Corrected {
        transition: transition.matrix(),
        corrected: &corrected,
    };
    fit_calibrated_with(&pooled, &vec![1.0; pooled.n_samples()], sgd, &objective)
}

fn untrusted_mask(split: &BiqualitySplit) -> Vec<bool> {
    let mut mask = vec![false; split.trusted.n_samples()];
    mask.resize(mask.len() + split.untrusted.n_samples(), true);
    mask
}

/// Training objective of the second GLC stage at fixed parameters, averaged
/// over `D_T ∪ D_U` (no weight decay).
pub fn glc_objective(model: &LinearModel, split: &BiqualitySplit, transition: &TransitionMatrix) -> Result<f64> {
    let pooled = split.pooled()?;
    let corrected = untrusted_mask(split);
    let objective = Objective::Corrected {
        transition: transition.matrix(),
        corrected: &corrected,
    };
    let rows: Vec<usize> = (0..pooled.n_samples()).collect();
    let n = pooled.n_samples() as f64;
    Ok(batch_objective(model, &pooled, &rows, &vec![1.0; rows.len()], &objective, 0.0, n))
}

/// Robust learner with the unhinged symmetric loss on `D_T ∪ D_U`.
pub fn rll_fit(split: &BiqualitySplit, sgd: &SgdConfig) -> Result<CalibratedModel> {
    if split.trusted.n_classes != 2 {
        return Err(Error::Unsupported(
            "the symmetric-loss learner is defined for binary tasks only".into(),
        ));
    }
    let pooled = split.pooled()?;
    fit_calibrated(&pooled, &vec![1.0; pooled.n_samples()], sgd, LossKind::Unhinged)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Trusted,
    Mixed,
    Untrusted,
}

/// Unit-weight calibrated logistic model on `D_T`, `D_T ∪ D_U` or `D_U`.
pub fn baseline_fit(split: &BiqualitySplit, which: Baseline, sgd: &SgdConfig) -> Result<CalibratedModel> {
    let data = match which {
        Baseline::Trusted => split.trusted.clone(),
        Baseline::Mixed => split.pooled()?,
        Baseline::Untrusted => split.untrusted.clone(),
    };
    if data.is_empty() {
        return Err(Error::EmptySubset(format!("{which:?} data is empty")));
    }
    fit_calibrated(&data, &vec![1.0; data.n_samples()], sgd, LossKind::Logistic)
}

/// Pooled weighted empirical risk and its trusted/untrusted decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskDecomposition {
    /// `(1/|D|) (Σ_T L + Σ_U β L)`.
    pub pooled: f64,
    /// Mean loss over `D_T`.
    pub trusted: f64,
    /// Mean of `β L` over `D_U`.
    pub untrusted: f64,
    /// `|D_T| / |D|`.
    pub p: f64,
}

/// Evaluate the weighted empirical risk of `model` on `D_T ∪ D_U`.
pub fn weighted_risk(
    model: &LinearModel,
    trusted: &Dataset,
    untrusted: &Dataset,
    weights: &BetaWeights,
    loss: LossKind,
) -> Result<RiskDecomposition> {
    check_vocabulary(trusted, untrusted)?;
    let (nt, nu) = (trusted.n_samples(), untrusted.n_samples());
    if weights.values.len() != nt + nu || weights.n_trusted != nt {
        return Err(Error::Dimension {
            expected: nt + nu,
            found: weights.values.len(),
        });
    }
    let objective = Objective::Loss(loss);
    let sum = |data: &Dataset, w: &[f64]| {
        let rows: Vec<usize> = (0..data.n_samples()).collect();
        batch_objective(model, data, &rows, w, &objective, 0.0, 1.0)
    };
    let sum_t = sum(trusted, weights.trusted());
    let sum_u = sum(untrusted, weights.untrusted());
    let n = (nt + nu) as f64;
    Ok(RiskDecomposition {
        pooled: (sum_t + sum_u) / n,
        trusted: if nt > 0 { sum_t / nt as f64 } else { 0.0 },
        untrusted: if nu > 0 { sum_u / nu as f64 } else { 0.0 },
        p: nt as f64 / n,
    })
}

/// The compared learning procedures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Trusted,
    Mixed,
    Untrusted,
    Irbl,
    Glc,
    Rll,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Trusted,
        Method::Mixed,
        Method::Untrusted,
        Method::Irbl,
        Method::Glc,
        Method::Rll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Trusted => "trusted",
            Method::Mixed => "mixed",
            Method::Untrusted => "untrusted",
            Method::Irbl => "irbl",
            Method::Glc => "glc",
            Method::Rll => "rll",
        }
    }

    /// Fit the method; IRBL also returns its weights.
    pub fn fit(self, split: &BiqualitySplit, sgd: &SgdConfig) -> Result<(CalibratedModel, Option<BetaWeights>)> {
        Ok(match self {
            Method::Trusted => (baseline_fit(split, Baseline::Trusted, sgd)?, None),
            Method::Mixed => (baseline_fit(split, Baseline::Mixed, sgd)?, None),
            Method::Untrusted => (baseline_fit(split, Baseline::Untrusted, sgd)?, None),
            Method::Irbl => {
                let fit = irbl_fit(split, sgd)?;
                (fit.model, Some(fit.weights))
            }
            Method::Glc => (glc_fit(split, sgd)?.model, None),
            Method::Rll => (rll_fit(split, sgd)?, None),
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}
