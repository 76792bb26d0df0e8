//! Accuracy and the nonparametric comparison battery: Friedman test,
//! Nemenyi critical difference, Wilcoxon signed-rank test.

use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::models::ProbabilisticModel;

/// Largest number of non-zero differences for which the Wilcoxon p-value is
/// computed by full enumeration of sign assignments.
pub const WILCOXON_EXACT_MAX: usize = 12;

/// Two-tailed Nemenyi critical values `q_0.05` for `k = 2..=10` methods.
const NEMENYI_Q05: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];

/// Fraction of test samples whose argmax prediction equals the label.
pub fn accuracy(model: &dyn ProbabilisticModel, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut correct = 0usize;
    for i in 0..test.n_samples() {
        if model.predict(test.row(i))? == test.labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.n_samples() as f64)
}

/// Mean accuracy of every method (columns) on every dataset (rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub datasets: Vec<String>,
    pub methods: Vec<String>,
    pub scores: Vec<Vec<f64>>,
}

impl ScoreTable {
    pub fn new(datasets: Vec<String>, methods: Vec<String>, scores: Vec<Vec<f64>>) -> Result<Self> {
        if scores.len() != datasets.len() {
            return Err(Error::Dimension {
                expected: datasets.len(),
                found: scores.len(),
            });
        }
        if let Some(row) = scores.iter().find(|r| r.len() != methods.len()) {
            return Err(Error::Dimension {
                expected: methods.len(),
                found: row.len(),
            });
        }
        if scores.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("score table cell".into()));
        }
        Ok(Self {
            datasets,
            methods,
            scores,
        })
    }

    pub fn n_datasets(&self) -> usize {
        self.datasets.len()
    }

    pub fn n_methods(&self) -> usize {
        self.methods.len()
    }

    /// Average rank of each method, rank 1 being the highest score; ties
    /// share the mean of the ranks they span.
    pub fn average_ranks(&self) -> Vec<f64> {
        let k = self.n_methods();
        let mut totals = vec![0.0; k];
        for row in &self.scores {
            let desc: Vec<f64> = row.iter().map(|v| -v).collect();
            for (t, r) in totals.iter_mut().zip(rank_average(&desc)) {
                *t += r;
            }
        }
        totals.iter().map(|t| t / self.n_datasets() as f64).collect()
    }

    /// CSV with a leading `dataset` column and one column per method.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset");
        for m in &self.methods {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        for (name, row) in self.datasets.iter().zip(&self.scores) {
            out.push_str(name);
            for v in row {
                out.push_str(&format!(",{v:?}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
            .clone();
        let methods: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut datasets = Vec::new();
        let mut scores = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::Parse {
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            datasets.push(rec[0].to_string());
            let row = rec
                .iter()
                .skip(1)
                .map(|c| {
                    c.parse::<f64>().map_err(|_| Error::Parse {
                        line,
                        message: format!("non-numeric score {c:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            scores.push(row);
        }
        Self::new(datasets, methods, scores)
    }
}

/// Ranks `1..=n` of `values` in ascending order, ties sharing their mean rank.
pub fn rank_average(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Reject,
    Retain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub decision: Decision,
}

impl TestOutcome {
    fn at(statistic: f64, p_value: f64, alpha: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        Self {
            statistic,
            p_value,
            decision: if p_value < alpha {
                Decision::Reject
            } else {
                Decision::Retain
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanOutcome {
    pub test: TestOutcome,
    pub average_ranks: Vec<f64>,
    /// Set when the table has a single dataset.
    pub low_power: bool,
}

/// Friedman chi-square test on the per-dataset ranks.
pub fn friedman(table: &ScoreTable, alpha: f64) -> Result<FriedmanOutcome> {
    let k = table.n_methods();
    let n = table.n_datasets();
    if k < 3 {
        return Err(Error::Config(format!(
            "the Friedman test needs at least 3 methods (got {k}); use the Wilcoxon signed-rank test"
        )));
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let low_power = n < 2;
    if low_power {
        warn!("Friedman test on a single dataset has no power");
    }
    let ranks = table.average_ranks();
    let (kf, nf) = (k as f64, n as f64);
    let sum_sq: f64 = ranks.iter().map(|r| r * r).sum();
    let statistic = (12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0)).max(0.0);
    let chi = ChiSquared::new(kf - 1.0).map_err(|e| Error::Config(e.to_string()))?;
    let p = chi.sf(statistic);
    Ok(FriedmanOutcome {
        test: TestOutcome::at(statistic, p, alpha),
        average_ranks: ranks,
        low_power,
    })
}

/// Nemenyi critical value `q_α(k)`; only `α = 0.05` is tabulated.
pub fn nemenyi_q(k: usize, alpha: f64) -> Result<f64> {
    if (alpha - 0.05).abs() > 1e-12 {
        return Err(Error::Unsupported(format!(
            "Nemenyi critical values are tabulated for alpha = 0.05 only (got {alpha})"
        )));
    }
    if !(2..=10).contains(&k) {
        return Err(Error::Unsupported(format!(
            "Nemenyi critical values are tabulated for 2..=10 methods (got {k})"
        )));
    }
    Ok(NEMENYI_Q05[k - 2])
}

/// `CD = q_α(k) sqrt(k (k + 1) / (6 N))`.
pub fn critical_difference(k: usize, n: usize, alpha: f64) -> Result<f64> {
    let q = nemenyi_q(k, alpha)?;
    Ok(q * ((k * (k + 1)) as f64 / (6.0 * n as f64)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NemenyiOutcome {
    /// Friedman pre-test; `None` for two methods.
    pub friedman: Option<FriedmanOutcome>,
    pub average_ranks: Vec<f64>,
    pub critical_difference: f64,
    /// Maximal sets of methods (indices, best rank first) whose average
    /// ranks all lie within less than CD of each other.
    pub groups: Vec<Vec<usize>>,
}

/// Maximal runs of rank-sorted methods spanning less than `cd`.
pub fn rank_groups(ranks: &[f64], cd: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..ranks.len()).collect();
    order.sort_by(|&a, &b| ranks[a].total_cmp(&ranks[b]).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut last_end = None;
    for start in 0..order.len() {
        let mut end = start;
        while end + 1 < order.len() && ranks[order[end + 1]] - ranks[order[start]] < cd {
            end += 1;
        }
        // a run ending where the previous one ended is contained in it
        if last_end.is_some_and(|e| end <= e) {
            continue;
        }
        last_end = Some(end);
        groups.push(order[start..=end].to_vec());
    }
    groups
}

/// Friedman test followed by the Nemenyi post-hoc grouping.
pub fn nemenyi(table: &ScoreTable, alpha: f64) -> Result<NemenyiOutcome> {
    let k = table.n_methods();
    let cd = critical_difference(k, table.n_datasets().max(1), alpha)?;
    let friedman = if k >= 3 {
        let f = friedman(table, alpha)?;
        if f.test.decision == Decision::Retain {
            warn!("Friedman test did not reject at alpha = {alpha}; Nemenyi groups are indicative only");
        }
        Some(f)
    } else {
        None
    };
    let ranks = table.average_ranks();
    let groups = rank_groups(&ranks, cd);
    Ok(NemenyiOutcome {
        friedman,
        average_ranks: ranks,
        critical_difference: cd,
        groups,
    })
}

/// Outcome of a paired comparison of `a` against `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    Win,
    Tie,
    Loss,
}

impl Comparison {
    pub fn reversed(self) -> Self {
        match self {
            Comparison::Win => Comparison::Loss,
            Comparison::Tie => Comparison::Tie,
            Comparison::Loss => Comparison::Win,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::Win => "○",
            Comparison::Tie => "·",
            Comparison::Loss => "●",
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparison::Win => "win",
            Comparison::Tie => "tie",
            Comparison::Loss => "loss",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonOutcome {
    pub test: TestOutcome,
    pub result: Comparison,
    /// Sum of ranks of positive differences `a - b`.
    pub rank_sum_positive: f64,
    pub rank_sum_negative: f64,
    /// Pairs used after dropping zero differences.
    pub n_used: usize,
    pub n_zero: usize,
    pub exact: bool,
}

/// Two-sided exact p-value of the signed-rank statistic by enumerating all
/// `2^m` sign assignments of the given (possibly tied) ranks.
pub fn wilcoxon_exact_p(ranks: &[f64], w_positive: f64) -> f64 {
    let m = ranks.len();
    let total: f64 = ranks.iter().sum();
    let center = total / 2.0;
    let observed = (w_positive - center).abs();
    let mut extreme = 0u64;
    for mask in 0u64..(1 << m) {
        let w: f64 = ranks
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, r)| r)
            .sum();
        if (w - center).abs() >= observed - 1e-9 {
            extreme += 1;
        }
    }
    (extreme as f64 / (1u64 << m) as f64).min(1.0)
}

/// Two-sided p-value from the normal approximation with tie correction.
pub fn wilcoxon_normal_p(ranks: &[f64], w_positive: f64) -> f64 {
    let m = ranks.len() as f64;
    let mean = m * (m + 1.0) / 4.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = m * (m + 1.0) * (2.0 * m + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = (w_positive - mean) / var.sqrt();
    let normal = Normal::standard();
    (2.0 * normal.sf(z.abs())).min(1.0)
}

/// Wilcoxon signed-rank test of `a` against `b`. Zero differences are
/// dropped; the p-value is exact for up to [`WILCOXON_EXACT_MAX`] remaining
/// pairs and uses the normal approximation beyond. A significant result is a
/// win for `a` when its positive rank sum dominates.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], alpha: f64) -> Result<WilcoxonOutcome> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            found: b.len(),
        });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("paired difference".into()));
    }
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    let n_zero = diffs.len() - nonzero.len();
    let m = nonzero.len();
    if m == 0 {
        return Ok(WilcoxonOutcome {
            test: TestOutcome::at(0.0, 1.0, alpha),
            result: Comparison::Tie,
            rank_sum_positive: 0.0,
            rank_sum_negative: 0.0,
            n_used: 0,
            n_zero,
            exact: true,
        });
    }
    let magnitudes: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = rank_average(&magnitudes);
    let w_pos: f64 = ranks.iter().zip(&nonzero).filter(|(_, &d)| d > 0.0).map(|(r, _)| r).sum();
    let w_neg: f64 = ranks.iter().zip(&nonzero).filter(|(_, &d)| d < 0.0).map(|(r, _)| r).sum();
    let exact = m <= WILCOXON_EXACT_MAX;
    let p = if exact {
        wilcoxon_exact_p(&ranks, w_pos)
    } else {
        wilcoxon_normal_p(&ranks, w_pos)
    };
    let test = TestOutcome::at(w_pos.min(w_neg), p, alpha);
    let result = match test.decision {
        Decision::Retain => Comparison::Tie,
        Decision::Reject if w_pos > w_neg => Comparison::Win,
        Decision::Reject if w_pos < w_neg => Comparison::Loss,
        Decision::Reject => Comparison::Tie,
    };
    Ok(WilcoxonOutcome {
        test,
        result,
        rank_sum_positive: w_pos,
        rank_sum_negative: w_neg,
        n_used: m,
        n_zero,
        exact,
    })
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
