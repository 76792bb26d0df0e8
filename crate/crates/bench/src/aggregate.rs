//! Reductions of result records: seed means, per-p summary tables, error
//! curves, pairwise Wilcoxon outcomes and score tables for rank tests.

use std::collections::{BTreeMap, BTreeSet};

use irbl::biquality::Method;
use irbl::noise::NoiseKind;
use irbl::stats::{mean_std, wilcoxon_signed_rank, Comparison, ScoreTable};
use serde::Serialize;

use crate::error::{BenchError, Result};
use crate::results::ResultRecord;

/// Significance level of every test in the reports.
pub const ALPHA: f64 = 0.05;

/// Grid coordinates of a seed-averaged result. Reals are keyed by their bit
/// pattern; all grid values are nonnegative so the order is numeric.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Key {
    dataset: String,
    noise: NoiseKind,
    p: u64,
    q: u64,
    method: Method,
}

/// Seed-averaged accuracies of the successful records.
#[derive(Debug, Clone)]
pub struct SeedMeans {
    means: BTreeMap<Key, f64>,
    pub datasets: Vec<String>,
    pub noise: Vec<NoiseKind>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub methods: Vec<Method>,
}

impl SeedMeans {
    pub fn new(records: &[ResultRecord]) -> Result<Self> {
        let mut sums: BTreeMap<Key, (f64, usize)> = BTreeMap::new();
        let mut datasets = Vec::new();
        for r in records.iter().filter(|r| r.is_ok()) {
            let Some(acc) = r.accuracy else { continue };
            if !datasets.contains(&r.dataset) {
                datasets.push(r.dataset.clone());
            }
            let e = sums
                .entry(Key {
                    dataset: r.dataset.clone(),
                    noise: r.noise,
                    p: r.p.to_bits(),
                    q: r.q.to_bits(),
                    method: r.method,
                })
                .or_default();
            e.0 += acc;
            e.1 += 1;
        }
        if sums.is_empty() {
            return Err(BenchError::NothingToReport("no successful records".into()));
        }
        let set = |f: &dyn Fn(&Key) -> u64| -> Vec<f64> {
            let s: BTreeSet<u64> = sums.keys().map(f).collect();
            s.into_iter().map(f64::from_bits).collect()
        };
        let p = set(&|k| k.p);
        let q = set(&|k| k.q);
        let noise: BTreeSet<NoiseKind> = sums.keys().map(|k| k.noise).collect();
        let methods: BTreeSet<Method> = sums.keys().map(|k| k.method).collect();
        let means = sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
        Ok(Self {
            means,
            datasets,
            noise: noise.into_iter().collect(),
            p,
            q,
            methods: methods.into_iter().collect(),
        })
    }

    pub fn get(&self, dataset: &str, noise: NoiseKind, p: f64, q: f64, method: Method) -> Option<f64> {
        self.means
            .get(&Key {
                dataset: dataset.to_string(),
                noise,
                p: p.to_bits(),
                q: q.to_bits(),
                method,
            })
            .copied()
    }

    /// Mean over the given `(p, q)` cells for one dataset and method, or
    /// `None` when any cell is missing.
    fn cells_mean(&self, dataset: &str, noise: &[NoiseKind], cells: &[(f64, f64)], method: Method) -> Option<f64> {
        let mut total = 0.0;
        let mut n = 0;
        for &kind in noise {
            for &(p, q) in cells {
                total += self.get(dataset, kind, p, q, method)?;
                n += 1;
            }
        }
        (n > 0).then(|| total / n as f64)
    }

    /// Datasets with a value for every method in every listed cell; the
    /// others are dropped with a warning.
    fn complete_datasets(&self, noise: &[NoiseKind], cells: &[(f64, f64)], context: &str) -> Vec<&str> {
        let keep: Vec<&str> = self
            .datasets
            .iter()
            .filter(|d| self.methods.iter().all(|&m| self.cells_mean(d, noise, cells, m).is_some()))
            .map(String::as_str)
            .collect();
        if keep.len() < self.datasets.len() {
            log::warn!(
                "{context}: {} of {} datasets have missing cells and are left out",
                self.datasets.len() - keep.len(),
                self.datasets.len()
            );
        }
        keep
    }

    fn grid(&self) -> Vec<(f64, f64)> {
        self.p.iter().flat_map(|&p| self.q.iter().map(move |&q| (p, q))).collect()
    }
}

/// Mean ± std (over datasets, in percent) of each method for every `p`,
/// averaging each dataset over all `q` and seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryTable {
    pub noise: NoiseKind,
    pub p: Vec<f64>,
    pub methods: Vec<Method>,
    /// `[p][method]`.
    pub mean: Vec<Vec<f64>>,
    pub std: Vec<Vec<f64>>,
    pub n_datasets: Vec<usize>,
}

impl SummaryTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,n_datasets");
        for m in &self.methods {
            out.push_str(&format!(",{m}_mean,{m}_std"));
        }
        out.push('\n');
        for (i, p) in self.p.iter().enumerate() {
            out.push_str(&format!("{p},{}", self.n_datasets[i]));
            for j in 0..self.methods.len() {
                out.push_str(&format!(",{:.4},{:.4}", self.mean[i][j], self.std[i][j]));
            }
            out.push('\n');
        }
        out
    }
}

pub fn summary_table(means: &SeedMeans, noise: NoiseKind) -> SummaryTable {
    let mut table = SummaryTable {
        noise,
        p: means.p.clone(),
        methods: means.methods.clone(),
        mean: vec![],
        std: vec![],
        n_datasets: vec![],
    };
    for &p in &means.p {
        let cells: Vec<(f64, f64)> = means.q.iter().map(|&q| (p, q)).collect();
        let datasets = means.complete_datasets(&[noise], &cells, &format!("{noise} p={p}"));
        let (mut mrow, mut srow) = (vec![], vec![]);
        for &m in &means.methods {
            let values: Vec<f64> = datasets
                .iter()
                .filter_map(|d| means.cells_mean(d, &[noise], &cells, m))
                .map(|v| 100.0 * v)
                .collect();
            let (mu, sd) = mean_std(&values);
            mrow.push(mu);
            srow.push(sd);
        }
        table.mean.push(mrow);
        table.std.push(srow);
        table.n_datasets.push(datasets.len());
    }
    table
}

/// Test error (percent) of one method at one grid point, averaged over seeds
/// and then datasets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub dataset: String,
    pub noise: NoiseKind,
    pub p: f64,
    pub q: f64,
    pub method: Method,
    pub error_mean: f64,
    pub error_std: f64,
    pub n_datasets: usize,
}

/// Error-versus-quality curves, both per dataset and pooled over datasets
/// (the pooled rows carry the dataset name `all`).
pub fn error_curves(means: &SeedMeans) -> Vec<CurvePoint> {
    let mut out = Vec::new();
    for &noise in &means.noise {
        for &p in &means.p {
            for &m in &means.methods {
                for &q in &means.q {
                    let mut pooled = Vec::new();
                    for d in &means.datasets {
                        if let Some(acc) = means.get(d, noise, p, q, m) {
                            let e = 100.0 * (1.0 - acc);
                            pooled.push(e);
                            out.push(CurvePoint {
                                dataset: d.clone(),
                                noise,
                                p,
                                q,
                                method: m,
                                error_mean: e,
                                error_std: 0.0,
                                n_datasets: 1,
                            });
                        }
                    }
                    if !pooled.is_empty() {
                        let (mu, sd) = mean_std(&pooled);
                        out.push(CurvePoint {
                            dataset: "all".into(),
                            noise,
                            p,
                            q,
                            method: m,
                            error_mean: mu,
                            error_std: sd,
                            n_datasets: pooled.len(),
                        });
                    }
                }
            }
        }
    }
    out
}

pub fn curves_to_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("dataset,noise,p,q,method,error_mean,error_std,n_datasets\n");
    for c in points {
        out.push_str(&format!(
            "{},{},{},{},{},{:.4},{:.4},{}\n",
            c.dataset, c.noise, c.p, c.q, c.method, c.error_mean, c.error_std, c.n_datasets
        ));
    }
    out
}

/// Wilcoxon outcome of `a` against `b` across datasets at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairOutcome {
    pub noise: NoiseKind,
    pub p: f64,
    pub q: f64,
    pub a: Method,
    pub b: Method,
    pub outcome: Comparison,
    pub p_value: f64,
    pub n_datasets: usize,
}

/// Outcomes for every ordered pair of distinct methods at every grid point.
pub fn wilcoxon_matrix(means: &SeedMeans) -> Result<Vec<PairOutcome>> {
    let mut out = Vec::new();
    for &noise in &means.noise {
        for &p in &means.p {
            for &q in &means.q {
                for &a in &means.methods {
                    for &b in &means.methods {
                        if a == b {
                            continue;
                        }
                        let (xs, ys): (Vec<f64>, Vec<f64>) = means
                            .datasets
                            .iter()
                            .filter_map(|d| Some((means.get(d, noise, p, q, a)?, means.get(d, noise, p, q, b)?)))
                            .unzip();
                        if xs.is_empty() {
                            continue;
                        }
                        let w = wilcoxon_signed_rank(&xs, &ys, ALPHA)?;
                        out.push(PairOutcome {
                            noise,
                            p,
                            q,
                            a,
                            b,
                            outcome: w.result,
                            p_value: w.test.p_value,
                            n_datasets: xs.len(),
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn pairs_to_csv(pairs: &[PairOutcome]) -> String {
    let mut out = String::from("noise,p,q,method_a,method_b,outcome,p_value,n_datasets\n");
    for o in pairs {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            o.noise, o.p, o.q, o.a, o.b, o.outcome, o.p_value, o.n_datasets
        ));
    }
    out
}

/// What one row of a rank-test score table stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// One row per dataset, averaged over the whole (p, q) grid.
    Dataset,
    /// One row per (dataset, p, q) grid point.
    Cell,
}

impl Aggregation {
    pub fn name(self) -> &'static str {
        match self {
            Aggregation::Dataset => "datasets",
            Aggregation::Cell => "cells",
        }
    }
}

/// Seed-averaged accuracies arranged for the Friedman/Nemenyi tests. With
/// `noise = None` both noise kinds are pooled.
pub fn score_table(means: &SeedMeans, noise: Option<NoiseKind>, aggregation: Aggregation) -> Result<ScoreTable> {
    let kinds: Vec<NoiseKind> = noise.map(|n| vec![n]).unwrap_or_else(|| means.noise.clone());
    let grid = means.grid();
    let mut names = Vec::new();
    let mut rows = Vec::new();
    match aggregation {
        Aggregation::Dataset => {
            for d in means.complete_datasets(&kinds, &grid, "score table") {
                names.push(d.to_string());
                rows.push(
                    means
                        .methods
                        .iter()
                        .map(|&m| means.cells_mean(d, &kinds, &grid, m).expect("complete dataset"))
                        .collect(),
                );
            }
        }
        Aggregation::Cell => {
            for d in &means.datasets {
                for &kind in &kinds {
                    for &(p, q) in &grid {
                        let row: Option<Vec<f64>> =
                            means.methods.iter().map(|&m| means.get(d, kind, p, q, m)).collect();
                        if let Some(row) = row {
                            names.push(format!("{d}/{kind}/p={p}/q={q}"));
                            rows.push(row);
                        }
                    }
                }
            }
        }
    }
    if rows.is_empty() {
        return Err(BenchError::NothingToReport("no complete rows for the score table".into()));
    }
    let methods = means.methods.iter().map(|m| m.to_string()).collect();
    Ok(ScoreTable::new(names, methods, rows)?)
}
