//! Result rows and their CSV form.

use std::fmt;
use std::str::FromStr;

use irbl::biquality::Method;
use irbl::noise::NoiseKind;

use crate::error::{BenchError, Result};

pub const RESULTS_HEADER: &str = "dataset,method,noise,p,q,seed,accuracy,wall_time_s,status,reason";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Ok,
    Failed,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Ok => "ok",
            Status::Failed => "failed",
        })
    }
}

/// One method evaluated on one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub dataset: String,
    pub method: Method,
    pub noise: NoiseKind,
    pub p: f64,
    pub q: f64,
    pub seed: u64,
    /// Test accuracy in `[0, 1]`; `None` for failed rows.
    pub accuracy: Option<f64>,
    pub wall_time_s: f64,
    pub status: Status,
    pub reason: String,
}

impl ResultRecord {
    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    fn fields(&self) -> [String; 10] {
        [
            self.dataset.clone(),
            self.method.to_string(),
            self.noise.to_string(),
            self.p.to_string(),
            self.q.to_string(),
            self.seed.to_string(),
            self.accuracy.map(|a| a.to_string()).unwrap_or_default(),
            format!("{:.6}", self.wall_time_s),
            self.status.to_string(),
            self.reason.clone(),
        ]
    }
}

/// CSV lines (no header) for a batch of records.
pub fn records_to_csv(records: &[ResultRecord]) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for r in records {
        w.write_record(r.fields()).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn parse_field<T: FromStr>(rec: &csv::StringRecord, i: usize, what: &str) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| BenchError::Results(format!("line {}: bad {what}", line_of(rec))))
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

pub fn parse_record(rec: &csv::StringRecord) -> Result<ResultRecord> {
    if rec.len() != 10 {
        return Err(BenchError::Results(format!(
            "line {}: expected 10 fields, found {}",
            line_of(rec),
            rec.len()
        )));
    }
    let status = match &rec[8] {
        "ok" => Status::Ok,
        "failed" => Status::Failed,
        other => return Err(BenchError::Results(format!("line {}: bad status {other:?}", line_of(rec)))),
    };
    let accuracy = match (&rec[6], status) {
        ("", Status::Failed) => None,
        _ => Some(parse_field::<f64>(rec, 6, "accuracy")?),
    };
    Ok(ResultRecord {
        dataset: rec[0].to_string(),
        method: parse_field(rec, 1, "method")?,
        noise: parse_field(rec, 2, "noise")?,
        p: parse_field(rec, 3, "p")?,
        q: parse_field(rec, 4, "q")?,
        seed: parse_field(rec, 5, "seed")?,
        accuracy,
        wall_time_s: parse_field(rec, 7, "wall_time_s")?,
        status,
        reason: rec[9].to_string(),
    })
}

/// Parse a complete results file, header included.
pub fn read_results(text: &str) -> Result<Vec<ResultRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != RESULTS_HEADER {
        return Err(BenchError::Results(format!("unexpected header {header:?}")));
    }
    reader
        .records()
        .map(|r| parse_record(&r?))
        .collect()
}

pub fn load_results(path: &std::path::Path) -> Result<Vec<ResultRecord>> {
    use crate::error::IoContext;
    read_results(&std::fs::read_to_string(path).at(path)?)
}
