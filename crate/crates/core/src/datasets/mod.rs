//! Tabular classification data: parsing, preprocessing and the
//! trusted/untrusted/test splits that define a biquality task.

mod bundled;
mod csv_format;
mod libsvm;
mod split;

pub use bundled::{bundled_names, load_bundled};
pub use csv_format::{parse_csv, CsvOptions, LabelColumn, LabelOrder};
pub use libsvm::parse_libsvm;
pub use split::{make_biquality, stratified_partition, stratified_split, BiqualitySplit};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{concatenate, Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of every dataset held out for testing.
pub const TEST_FRACTION: f64 = 0.20;

/// Dense feature matrix with integer class labels in `[0, n_classes)`.
///
/// `ids` carries the row index of every sample in the source it was loaded
/// from, so that splits and corruption records can be traced back.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub feature_names: Option<Vec<String>>,
    pub class_names: Option<Vec<String>>,
    pub ids: Vec<usize>,
}

impl Dataset {
    /// Build a dataset, checking shapes and label ranges. Origin ids are `0..n`.
    pub fn new(features: Array2<f64>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Dimension {
                expected: features.nrows(),
                found: labels.len(),
            });
        }
        if n_classes < 2 {
            return Err(Error::DegenerateLabels(format!(
                "need at least 2 classes, got {n_classes}"
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(Error::Config(format!(
                "label {bad} outside [0, {n_classes})"
            )));
        }
        let ids = (0..labels.len()).collect();
        Ok(Self {
            features,
            labels,
            n_classes,
            feature_names: None,
            class_names: None,
            ids,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order. Origin ids are carried over.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            ids: indices.iter().map(|&i| self.ids[i]).collect(),
        }
    }

    /// Same samples with replaced labels.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Dataset> {
        if labels.len() != self.n_samples() {
            return Err(Error::Dimension {
                expected: self.n_samples(),
                found: labels.len(),
            });
        }
        if labels.iter().any(|&y| y >= self.n_classes) {
            return Err(Error::Config("label outside class range".into()));
        }
        Ok(Dataset {
            labels,
            ..self.clone()
        })
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.n_features() != other.n_features() {
            return Err(Error::Dimension {
                expected: self.n_features(),
                found: other.n_features(),
            });
        }
        if self.n_classes != other.n_classes {
            return Err(Error::Config(format!(
                "class vocabularies differ: {} vs {}",
                self.n_classes, other.n_classes
            )));
        }
        let features = concatenate(Axis(0), &[self.features.view(), other.features.view()])
            .map_err(|e| Error::Config(e.to_string()))?;
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let mut ids = self.ids.clone();
        ids.extend_from_slice(&other.ids);
        Ok(Dataset {
            features,
            labels,
            n_classes: self.n_classes,
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            ids,
        })
    }

    /// Canonical CSV form: a header of feature names plus a trailing `label`
    /// column holding class indices. Values use the shortest representation
    /// that parses back to the same `f64`.
    pub fn to_canonical_csv(&self) -> String {
        let mut out = String::new();
        let names: Vec<String> = match &self.feature_names {
            Some(names) => names.iter().map(|n| quote_field(n)).collect(),
            None => (0..self.n_features()).map(|j| format!("f{j}")).collect(),
        };
        out.push_str(&names.join(","));
        out.push_str(",label\n");
        for (row, y) in self.features.outer_iter().zip(&self.labels) {
            for v in row.iter() {
                let _ = write!(out, "{v:?},");
            }
            let _ = writeln!(out, "{y}");
        }
        out
    }

    /// Parse the canonical CSV form written by [`Dataset::to_canonical_csv`].
    pub fn from_canonical_csv(text: &str, n_classes: usize) -> Result<Dataset> {
        let options = CsvOptions {
            label_order: LabelOrder::Sorted,
            ..CsvOptions::default()
        };
        let mut data = parse_csv(text, &LabelColumn::Name("label".into()), &options)?;
        if n_classes < data.n_classes {
            return Err(Error::Config(format!(
                "{} classes found, {n_classes} declared",
                data.n_classes
            )));
        }
        data.n_classes = n_classes;
        Ok(data)
    }
}

fn quote_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Per-feature affine map fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Array1<f64>,
    /// Population standard deviation; zero marks a constant feature.
    pub scale: Array1<f64>,
}

impl Scaler {
    pub fn fit(data: &Dataset) -> Result<Scaler> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = data.n_samples() as f64;
        let mean = data.features.sum_axis(Axis(0)) / n;
        let mut scale = Array1::zeros(data.n_features());
        for (j, col) in data.features.columns().into_iter().enumerate() {
            let m = mean[j];
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let sd = var.sqrt();
            scale[j] = if sd <= 1e-12 * m.abs().max(1.0) { 0.0 } else { sd };
        }
        Ok(Scaler { mean, scale })
    }

    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        if data.n_features() != self.mean.len() {
            return Err(Error::Dimension {
                expected: self.mean.len(),
                found: data.n_features(),
            });
        }
        let mut out = data.clone();
        for mut row in out.features.outer_iter_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if self.scale[j] == 0.0 {
                    0.0
                } else {
                    (*v - self.mean[j]) / self.scale[j]
                };
            }
        }
        Ok(out)
    }
}

/// Fit a standardizing map on `train` and apply it to `train` and `others`.
pub fn standardize(train: &Dataset, others: &[&Dataset]) -> Result<(Dataset, Vec<Dataset>, Scaler)> {
    let scaler = Scaler::fit(train)?;
    let train_out = scaler.transform(train)?;
    let others_out = others
        .iter()
        .map(|d| scaler.transform(d))
        .collect::<Result<Vec<_>>>()?;
    Ok((train_out, others_out, scaler))
}

/// On-disk formats understood by the loader.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Libsvm,
}

/// One entry of a dataset manifest. Entries without a `path` refer to the
/// datasets bundled with the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default = "default_format")]
    pub format: DataFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_column: Option<LabelColumn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delimiter: Option<char>,
    #[serde(default = "default_true")]
    pub header: bool,
}

fn default_format() -> DataFormat {
    DataFormat::Csv
}

fn default_true() -> bool {
    true
}

impl DatasetSource {
    pub fn bundled(name: &str) -> Self {
        Self {
            name: name.to_string(),
            path: None,
            format: DataFormat::Csv,
            label_column: None,
            delimiter: None,
            header: true,
        }
    }

    /// Load the dataset. Relative paths are resolved against `base_dir`.
    pub fn load(&self, base_dir: Option<&Path>) -> Result<Dataset> {
        let Some(path) = &self.path else {
            return load_bundled(&self.name);
        };
        let path = match base_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.clone(),
        };
        let text = std::fs::read_to_string(&path)?;
        match self.format {
            DataFormat::Libsvm => parse_libsvm(&text),
            DataFormat::Csv => {
                let options = CsvOptions {
                    delimiter: self.delimiter.map(|c| c as u8).unwrap_or(b','),
                    has_header: self.header,
                    ..CsvOptions::default()
                };
                let label = self.label_column.clone().unwrap_or(LabelColumn::Last);
                parse_csv(&text, &label, &options)
            }
        }
    }
}
