use std::collections::HashMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

const MISSING_MARKERS: [&str; 6] = ["", "NA", "N/A", "?", "NaN", "nan"];
const MISSING_CATEGORY: &str = "missing";

/// Which column of a CSV table holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
    #[serde(skip)]
    Last,
}

/// Order in which label values are mapped to class indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelOrder {
    /// First appearance in the file.
    #[default]
    FirstAppearance,
    /// Ascending; numeric when every label parses as a number.
    Sorted,
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
    pub label_order: LabelOrder,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: true,
            label_order: LabelOrder::FirstAppearance,
        }
    }
}

fn is_missing(value: &str) -> bool {
    MISSING_MARKERS.contains(&value)
}

fn parse_number(value: &str) -> Option<f64> {
    value.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Factorize values into indices, in first-appearance order.
fn factorize<'a>(values: impl Iterator<Item = &'a str>) -> (Vec<String>, HashMap<String, usize>) {
    let mut levels = Vec::new();
    let mut index = HashMap::new();
    for v in values {
        if !index.contains_key(v) {
            index.insert(v.to_string(), levels.len());
            levels.push(v.to_string());
        }
    }
    (levels, index)
}

enum Column {
    Numeric { values: Vec<f64> },
    Categorical { levels: Vec<String>, codes: Vec<usize> },
}

fn build_column(cells: &[&str]) -> Column {
    let numeric = cells
        .iter()
        .all(|c| is_missing(c) || parse_number(c).is_some());
    if numeric {
        let observed: Vec<f64> = cells.iter().filter_map(|c| parse_number(c)).collect();
        let mean = if observed.is_empty() {
            0.0
        } else {
            observed.iter().sum::<f64>() / observed.len() as f64
        };
        let values = cells
            .iter()
            .map(|c| parse_number(c).unwrap_or(mean))
            .collect();
        Column::Numeric { values }
    } else {
        let mapped: Vec<&str> = cells
            .iter()
            .map(|&c| if is_missing(c) { MISSING_CATEGORY } else { c })
            .collect();
        let (levels, index) = factorize(mapped.iter().copied());
        let codes = mapped.iter().map(|c| index[*c]).collect();
        Column::Categorical { levels, codes }
    }
}

/// Parse a delimited table into a dataset.
///
/// Numeric columns keep their values with missing cells replaced by the
/// column mean; any other column is one-hot encoded in first-appearance
/// order, missing cells forming an explicit `missing` category. The label
/// column is factorized according to `options.label_order`.
pub fn parse_csv(text: &str, label: &LabelColumn, options: &CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(options.has_header)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header: Option<Vec<String>> = if options.has_header {
        let h = reader.headers().map_err(csv_error)?;
        Some(h.iter().map(str::to_string).collect())
    } else {
        None
    };

    let mut records = Vec::new();
    let mut lines = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_error)?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        lines.push(rec.position().map(|p| p.line() as usize).unwrap_or(0));
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let width = records[0].len();

    let label_idx = match label {
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => {
            return Err(Error::Config(format!(
                "label column {i} out of range for {width} columns"
            )))
        }
        LabelColumn::Last => width - 1,
        LabelColumn::Name(name) => {
            let header = header.as_ref().ok_or_else(|| {
                Error::Config(format!(
                    "label column {name:?} given by name but the table has no header"
                ))
            })?;
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Config(format!("label column {name:?} not found")))?
        }
    };
    if width < 2 {
        return Err(Error::Config("table needs at least one feature column".into()));
    }

    let label_cells: Vec<&str> = records.iter().map(|r| &r[label_idx]).collect();
    if let Some(pos) = label_cells.iter().position(|c| is_missing(c)) {
        return Err(Error::Parse {
            line: lines[pos],
            message: "missing label".into(),
        });
    }
    let (mut levels, _) = factorize(label_cells.iter().copied());
    if options.label_order == LabelOrder::Sorted {
        if levels.iter().all(|l| parse_number(l).is_some()) {
            levels.sort_by(|a, b| parse_number(a).unwrap().total_cmp(&parse_number(b).unwrap()));
        } else {
            levels.sort();
        }
    }
    if levels.len() < 2 {
        return Err(Error::DegenerateLabels(format!(
            "label column has a single class {:?}",
            levels[0]
        )));
    }
    let index: HashMap<&str, usize> = levels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let labels: Vec<usize> = label_cells.iter().map(|c| index[c]).collect();

    let mut names = Vec::new();
    let mut columns = Vec::new();
    for j in (0..width).filter(|&j| j != label_idx) {
        let cells: Vec<&str> = records.iter().map(|r| &r[j]).collect();
        let col_name = header
            .as_ref()
            .map(|h| h[j].clone())
            .unwrap_or_else(|| format!("c{j}"));
        let column = build_column(&cells);
        match &column {
            Column::Numeric { .. } => names.push(col_name),
            Column::Categorical { levels, .. } => {
                names.extend(levels.iter().map(|l| format!("{col_name}={l}")))
            }
        }
        columns.push(column);
    }

    let n = records.len();
    let mut features = Array2::zeros((n, names.len()));
    let mut offset = 0;
    for column in &columns {
        match column {
            Column::Numeric { values } => {
                for (i, v) in values.iter().enumerate() {
                    features[[i, offset]] = *v;
                }
                offset += 1;
            }
            Column::Categorical { levels, codes } => {
                for (i, &c) in codes.iter().enumerate() {
                    features[[i, offset + c]] = 1.0;
                }
                offset += levels.len();
            }
        }
    }

    let mut data = Dataset::new(features, labels, levels.len())?;
    data.feature_names = Some(names);
    data.class_names = Some(levels);
    Ok(data)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("ragged row: expected {expected_len} fields, found {len}"),
        _ => e.to_string(),
    };
    Error::Parse { line, message }
}
