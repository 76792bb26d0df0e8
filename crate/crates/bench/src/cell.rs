//! One sweep cell: a (dataset, noise, p, q, seed) coordinate evaluated for
//! every requested method.

use std::time::Instant;

use irbl::biquality::{BetaWeights, Method};
use irbl::datasets::{make_biquality, standardize, stratified_split, BiqualitySplit, Dataset, TEST_FRACTION};
use irbl::models::{fit_calibrated, CalibratedModel, LossKind, SgdConfig};
use irbl::noise::{CorruptionRecord, NoiseKind, NoiseSpec};
use irbl::seed::{derive_seed, hash_f64, hash_str};
use irbl::stats::accuracy;

use crate::results::{ResultRecord, Status};

// stream tags, one per source of randomness
const TEST_SPLIT: u64 = 1;
const BOUNDARY_MODEL: u64 = 2;
const TRUSTED_SPLIT: u64 = 3;
const METHOD_SGD: u64 = 4;
const CORRUPTION: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    /// Position of the dataset in the config.
    pub dataset: usize,
    pub noise: NoiseKind,
    pub p: f64,
    pub q: f64,
    pub seed: u64,
}

/// Everything a cell needs besides its coordinates.
#[derive(Debug, Clone)]
pub struct CellContext<'a> {
    pub name: &'a str,
    pub data: &'a Dataset,
    pub methods: &'a [Method],
    pub sgd: &'a SgdConfig,
    pub base_seed: u64,
    pub record_wall_time: bool,
}

/// Per-example β̂ with ground truth, in pooled (trusted-first) order.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaDiagnostics {
    pub ids: Vec<usize>,
    pub trusted: Vec<bool>,
    pub flipped: Vec<bool>,
    pub beta: Vec<f64>,
}

impl BetaDiagnostics {
    fn new(split: &BiqualitySplit, corruption: &CorruptionRecord, weights: &BetaWeights) -> Self {
        let nt = split.trusted.n_samples();
        let mut ids = split.trusted.ids.clone();
        ids.extend_from_slice(&split.untrusted.ids);
        let mut trusted = vec![true; nt];
        trusted.resize(ids.len(), false);
        let mut flipped = vec![false; nt];
        flipped.extend_from_slice(&corruption.flipped);
        Self {
            ids,
            trusted,
            flipped,
            beta: weights.as_slice().to_vec(),
        }
    }

    /// `(β̂, flipped)` of the untrusted examples.
    pub fn untrusted(&self) -> impl Iterator<Item = (f64, bool)> + '_ {
        self.beta
            .iter()
            .zip(&self.flipped)
            .zip(&self.trusted)
            .filter(|(_, &t)| !t)
            .map(|((&b, &f), _)| (b, f))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,trusted,flipped,beta\n");
        for i in 0..self.ids.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.ids[i],
                u8::from(self.trusted[i]),
                u8::from(self.flipped[i]),
                self.beta[i]
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> crate::error::Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut d = Self {
            ids: vec![],
            trusted: vec![],
            flipped: vec![],
            beta: vec![],
        };
        let bad = |what: &str| crate::error::BenchError::Results(format!("bad β diagnostics {what}"));
        for rec in reader.records() {
            let rec = rec?;
            if rec.len() != 4 {
                return Err(bad("row"));
            }
            d.ids.push(rec[0].parse().map_err(|_| bad("index"))?);
            d.trusted.push(&rec[1] == "1");
            d.flipped.push(&rec[2] == "1");
            d.beta.push(rec[3].parse().map_err(|_| bad("beta"))?);
        }
        Ok(d)
    }
}

#[derive(Debug, Clone, Default)]
pub struct CellOutput {
    /// One record per requested method, in method order.
    pub records: Vec<ResultRecord>,
    pub beta: Option<BetaDiagnostics>,
    pub corruption: Option<CorruptionRecord>,
}

/// Train/test split, standardized on the training part.
pub fn train_test(ctx: &CellContext<'_>, seed: u64) -> irbl::Result<(Dataset, Dataset)> {
    let coord = hash_str(ctx.name);
    let (test, train) = stratified_split(ctx.data, TEST_FRACTION, derive_seed(ctx.base_seed, &[seed, coord, TEST_SPLIT]))?;
    let (train, others, _) = standardize(&train, &[&test])?;
    Ok((train, others.into_iter().next().expect("one transformed set")))
}

/// The model of the clean concept used to place NNAR noise near the boundary.
pub fn boundary_model(ctx: &CellContext<'_>, seed: u64, train: &Dataset) -> irbl::Result<CalibratedModel> {
    let sgd = ctx
        .sgd
        .with_seed(derive_seed(ctx.base_seed, &[seed, hash_str(ctx.name), BOUNDARY_MODEL]));
    fit_calibrated(train, &vec![1.0; train.n_samples()], &sgd, LossKind::Logistic)
}

/// Seed for the method fits; depends on the trusted ratio but not on the
/// noise, so the trusted baseline is shared across noise kinds and qualities.
pub fn method_seed(ctx: &CellContext<'_>, cell: &Cell) -> u64 {
    derive_seed(ctx.base_seed, &[cell.seed, hash_str(ctx.name), hash_f64(cell.p), METHOD_SGD])
}

/// The corrupted biquality split of a cell, with the corruption ground truth.
pub fn corrupted_split(ctx: &CellContext<'_>, cell: &Cell) -> irbl::Result<(BiqualitySplit, CorruptionRecord)> {
    let coord = hash_str(ctx.name);
    let (train, test) = train_test(ctx, cell.seed)?;
    let f_total = match cell.noise {
        NoiseKind::Nnar => Some(boundary_model(ctx, cell.seed, &train)?),
        NoiseKind::Ncar => None,
    };
    let split = make_biquality(
        &train,
        &test,
        cell.p,
        derive_seed(ctx.base_seed, &[cell.seed, coord, hash_f64(cell.p), TRUSTED_SPLIT]),
    )?;
    let noise_seed = derive_seed(
        ctx.base_seed,
        &[cell.seed, coord, hash_f64(cell.p), cell.noise as u64, hash_f64(cell.q), CORRUPTION],
    );
    let spec = NoiseSpec::new(cell.noise, cell.q, noise_seed)?;
    let (untrusted, record) = spec.apply(
        &split.untrusted,
        f_total.as_ref().map(|m| m as &dyn irbl::models::ProbabilisticModel),
    )?;
    Ok((split.with_untrusted(untrusted), record))
}

fn record(ctx: &CellContext<'_>, cell: &Cell, method: Method) -> ResultRecord {
    ResultRecord {
        dataset: ctx.name.to_string(),
        method,
        noise: cell.noise,
        p: cell.p,
        q: cell.q,
        seed: cell.seed,
        accuracy: None,
        wall_time_s: 0.0,
        status: Status::Failed,
        reason: String::new(),
    }
}

/// Run the full pipeline of one cell. Failures never propagate: a failing
/// preparation step fails every method of the cell, a failing method only
/// its own row.
pub fn run_cell(ctx: &CellContext<'_>, cell: &Cell) -> CellOutput {
    let (split, corruption) = match corrupted_split(ctx, cell) {
        Ok(s) => s,
        Err(e) => {
            let reason = e.to_string();
            log::warn!("{} {:?}: {reason}", ctx.name, cell);
            let records = ctx
                .methods
                .iter()
                .map(|&m| ResultRecord {
                    reason: reason.clone(),
                    ..record(ctx, cell, m)
                })
                .collect();
            return CellOutput {
                records,
                ..CellOutput::default()
            };
        }
    };
    let sgd = ctx.sgd.with_seed(method_seed(ctx, cell));
    let mut out = CellOutput::default();
    for &method in ctx.methods {
        let start = Instant::now();
        let fitted = method.fit(&split, &sgd);
        let elapsed = start.elapsed().as_secs_f64();
        let mut rec = record(ctx, cell, method);
        if ctx.record_wall_time {
            rec.wall_time_s = elapsed;
        }
        match fitted.and_then(|(model, weights)| Ok((accuracy(&model, &split.test)?, weights))) {
            Ok((acc, weights)) => {
                rec.accuracy = Some(acc);
                rec.status = Status::Ok;
                if let Some(w) = weights {
                    out.beta = Some(BetaDiagnostics::new(&split, &corruption, &w));
                }
            }
            Err(e) => rec.reason = e.to_string(),
        }
        out.records.push(rec);
    }
    out.corruption = Some(corruption);
    out
}
