//! Label corruption of the untrusted part, parameterized by a quality `q`.
//!
//! NCAR draws every example with a fixed probability `r = 1 - q`; NNAR draws
//! it with `r(x) = 1 - θ |1 - 2 f(x)|^(1/θ)` where `f(x)` is the class-1
//! probability of a model trained on clean data and `θ = q`. A drawn example
//! receives a label sampled uniformly over all classes, which may be its
//! original label, so selection and flipping are tracked separately.

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView1;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::models::ProbabilisticModel;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NoiseKind {
    Ncar,
    Nnar,
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Ncar => "NCAR",
            NoiseKind::Nnar => "NNAR",
        })
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NCAR" => Ok(NoiseKind::Ncar),
            "NNAR" => Ok(NoiseKind::Nnar),
            _ => Err(Error::Config(format!("unknown noise kind {s:?}"))),
        }
    }
}

/// Noise family, quality and seed; fully determines a corruption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub quality: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, quality: f64, seed: u64) -> Result<Self> {
        check_quality(quality)?;
        Ok(Self { kind, quality, seed })
    }

    /// Corrupt `data`; NNAR needs the clean-data model `f_total`.
    pub fn apply(
        &self,
        data: &Dataset,
        f_total: Option<&dyn ProbabilisticModel>,
    ) -> Result<(Dataset, CorruptionRecord)> {
        match self.kind {
            NoiseKind::Ncar => ncar_corrupt(data, self.quality, self.seed),
            NoiseKind::Nnar => {
                let model = f_total.ok_or_else(|| {
                    Error::Config("NNAR noise requires a boundary model".into())
                })?;
                nnar_corrupt(data, model, self.quality, self.seed)
            }
        }
    }
}

fn check_quality(q: f64) -> Result<()> {
    if (0.0..=1.0).contains(&q) {
        Ok(())
    } else {
        Err(Error::Config(format!("quality must lie in [0, 1], got {q}")))
    }
}

/// Ground truth of a corruption, aligned with the corrupted dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorruptionRecord {
    pub ids: Vec<usize>,
    pub original_labels: Vec<usize>,
    pub corrupted_labels: Vec<usize>,
    pub selected: Vec<bool>,
    pub flipped: Vec<bool>,
}

impl CorruptionRecord {
    pub fn selected_fraction(&self) -> f64 {
        fraction(&self.selected)
    }

    pub fn flipped_fraction(&self) -> f64 {
        fraction(&self.flipped)
    }

    /// `index,original_label,corrupted_label,selected,flipped` rows; the
    /// index is the origin id of the example.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,original_label,corrupted_label,selected,flipped\n");
        for i in 0..self.ids.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.ids[i],
                self.original_labels[i],
                self.corrupted_labels[i],
                u8::from(self.selected[i]),
                u8::from(self.flipped[i])
            ));
        }
        out
    }
}

fn fraction(flags: &[bool]) -> f64 {
    if flags.is_empty() {
        0.0
    } else {
        flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64
    }
}

fn corrupt_with(
    data: &Dataset,
    seed: u64,
    mut rate: impl FnMut(usize) -> Result<f64>,
) -> Result<(Dataset, CorruptionRecord)> {
    let mut rng = seed::rng(seed);
    let n = data.n_samples();
    let mut labels = data.labels.clone();
    let mut selected = vec![false; n];
    let mut flipped = vec![false; n];
    for i in 0..n {
        let r = rate(i)?;
        let u: f64 = rng.random();
        if u < r {
            selected[i] = true;
            labels[i] = rng.random_range(0..data.n_classes);
            flipped[i] = labels[i] != data.labels[i];
        }
    }
    let record = CorruptionRecord {
        ids: data.ids.clone(),
        original_labels: data.labels.clone(),
        corrupted_labels: labels.clone(),
        selected,
        flipped,
    };
    Ok((data.with_labels(labels)?, record))
}

/// Noisy completely at random: each example is drawn with probability
/// `r = 1 - q` and relabelled uniformly over the `K` classes.
pub fn ncar_corrupt(data: &Dataset, q: f64, seed: u64) -> Result<(Dataset, CorruptionRecord)> {
    check_quality(q)?;
    let r = 1.0 - q;
    corrupt_with(data, seed, |_| Ok(r))
}

/// Corruption probability `r(x) = 1 - θ |1 - 2 f(x)|^(1/θ)`, with `r ≡ 1` at
/// `θ = 0`. Binary tasks only.
pub fn nnar_rate(f_total: &dyn ProbabilisticModel, x: ArrayView1<'_, f64>, theta: f64) -> Result<f64> {
    if f_total.n_classes() != 2 {
        return Err(Error::Unsupported(
            "NNAR noise is defined for binary tasks only".into(),
        ));
    }
    check_quality(theta)?;
    if theta == 0.0 {
        return Ok(1.0);
    }
    let p1 = f_total.predict_proba(x)?[1];
    let r = 1.0 - theta * (1.0 - 2.0 * p1).abs().powf(1.0 / theta);
    Ok(r.clamp(0.0, 1.0))
}

/// Noisy not at random: each example is drawn with probability `r(x)` from
/// [`nnar_rate`] with `θ = q` and relabelled uniformly over `{0, 1}`.
pub fn nnar_corrupt(
    data: &Dataset,
    f_total: &dyn ProbabilisticModel,
    q: f64,
    seed: u64,
) -> Result<(Dataset, CorruptionRecord)> {
    if data.n_classes != 2 || f_total.n_classes() != 2 {
        return Err(Error::Unsupported(
            "NNAR noise is defined for binary tasks only".into(),
        ));
    }
    corrupt_with(data, seed, |i| nnar_rate(f_total, data.row(i), q))
}
