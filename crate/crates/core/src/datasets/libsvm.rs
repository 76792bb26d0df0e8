use ndarray::Array2;

use super::Dataset;
use crate::error::{Error, Result};

struct Row {
    label: f64,
    entries: Vec<(usize, f64)>,
}

fn parse_line(line: &str, line_no: usize) -> Result<Row> {
    let err = |message: String| Error::Parse {
        line: line_no,
        message,
    };
    let mut tokens = line.split_whitespace();
    let label_tok = tokens.next().ok_or_else(|| err("missing label".into()))?;
    let label: f64 = label_tok
        .parse()
        .map_err(|_| err(format!("invalid label {label_tok:?}")))?;
    if !label.is_finite() {
        return Err(err(format!("invalid label {label_tok:?}")));
    }
    let mut entries = Vec::new();
    let mut last = 0usize;
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| err(format!("expected <index>:<value>, got {tok:?}")))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| err(format!("invalid feature index {idx:?}")))?;
        if idx == 0 {
            return Err(err("feature indices are 1-based".into()));
        }
        if idx == last {
            return Err(err(format!("duplicate feature index {idx}")));
        }
        if idx < last {
            return Err(err(format!(
                "feature indices must be strictly increasing ({idx} after {last})"
            )));
        }
        let val: f64 = val
            .parse()
            .map_err(|_| err(format!("non-numeric value {val:?}")))?;
        if !val.is_finite() {
            return Err(err(format!("non-finite value {val:?}")));
        }
        entries.push((idx, val));
        last = idx;
    }
    Ok(Row { label, entries })
}

/// Parse the sparse `<label> <index>:<value> ...` text format into a dense
/// dataset. Labels `{-1, +1}` and `{0, 1}` map to classes `{0, 1}`; any
/// other label set is mapped to class indices in ascending numeric order.
pub fn parse_libsvm(text: &str) -> Result<Dataset> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        rows.push(parse_line(line, i + 1)?);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n_features = rows
        .iter()
        .filter_map(|r| r.entries.last().map(|&(idx, _)| idx))
        .max()
        .unwrap_or(0);
    if n_features == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "no feature entries in file".into(),
        });
    }

    let mut distinct: Vec<f64> = rows.iter().map(|r| r.label).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let binary_pm = distinct.iter().all(|&v| v == -1.0 || v == 1.0);
    let binary_01 = distinct.iter().all(|&v| v == 0.0 || v == 1.0);
    let (n_classes, class_of): (usize, Box<dyn Fn(f64) -> usize>) = if binary_pm {
        (2, Box::new(|v: f64| usize::from(v > 0.0)))
    } else if binary_01 {
        (2, Box::new(|v: f64| usize::from(v > 0.5)))
    } else {
        if distinct.len() < 2 {
            return Err(Error::DegenerateLabels("a single class in file".into()));
        }
        let table = distinct.clone();
        (
            table.len(),
            Box::new(move |v: f64| {
                table
                    .binary_search_by(|t| t.total_cmp(&v))
                    .expect("label present in table")
            }),
        )
    };
    let class_names = if binary_pm {
        vec!["-1".to_string(), "+1".to_string()]
    } else if binary_01 {
        vec!["0".to_string(), "1".to_string()]
    } else {
        distinct.iter().map(|v| format!("{v}")).collect()
    };

    let mut features = Array2::zeros((rows.len(), n_features));
    let mut labels = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        for &(idx, val) in &row.entries {
            features[[i, idx - 1]] = val;
        }
        labels.push(class_of(row.label));
    }
    let mut data = Dataset::new(features, labels, n_classes)?;
    data.class_names = Some(class_names);
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn densifies_sparse_rows() {
        let d = parse_libsvm("+1 1:0.5 3:2.0\n-1 2:1.0").unwrap();
        assert_eq!(d.n_samples(), 2);
        assert_eq!(d.n_features(), 3);
        assert_eq!(d.features, array![[0.5, 0.0, 2.0], [0.0, 1.0, 0.0]]);
        assert_eq!(d.labels, vec![1, 0]);
    }

    #[test]
    fn zero_one_labels() {
        let d = parse_libsvm("0 1:1\n1 1:2\n").unwrap();
        assert_eq!(d.labels, vec![0, 1]);
    }

    #[test]
    fn multiclass_labels_sorted() {
        let d = parse_libsvm("3 1:1\n1 1:2\n2 1:0\n").unwrap();
        assert_eq!(d.n_classes, 3);
        assert_eq!(d.labels, vec![2, 0, 1]);
    }

    #[test]
    fn empty_input() {
        assert!(matches!(parse_libsvm(""), Err(Error::EmptyDataset)));
        assert!(matches!(parse_libsvm("\n  \n"), Err(Error::EmptyDataset)));
    }

    #[test]
    fn non_increasing_indices() {
        match parse_libsvm("+1 3:1 1:1") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_index_and_bad_values() {
        assert!(matches!(
            parse_libsvm("+1 1:1\n-1 2:1 2:3"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_libsvm("+1 1:abc"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_libsvm("+1 1-3"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_libsvm("x 1:3"),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
