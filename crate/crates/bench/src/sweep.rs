//! Parallel sweep over every cell of a config, with an append-only results
//! file that is always a prefix of the full run in cell order.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use irbl::datasets::{Dataset, DatasetSource};
use irbl::noise::NoiseKind;
use rayon::prelude::*;

use crate::cell::{run_cell, Cell, CellContext, CellOutput};
use crate::config::ExperimentConfig;
use crate::error::{BenchError, IoContext, Result};
use crate::results::{parse_record, records_to_csv, ResultRecord, Status, RESULTS_HEADER};

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; `None` uses the available parallelism.
    pub jobs: Option<usize>,
    /// Keep the complete cells of an existing results file and run the rest.
    pub resume: bool,
    /// Stop after this many newly computed cells, as if interrupted.
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub results_path: PathBuf,
    pub total_cells: usize,
    pub resumed_cells: usize,
    pub computed_cells: usize,
    pub failed_records: usize,
}

impl SweepSummary {
    pub fn complete(&self) -> bool {
        self.resumed_cells + self.computed_cells == self.total_cells
    }
}

/// All cells in file order: dataset, noise, p, q, then seed.
pub fn enumerate_cells(config: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::with_capacity(config.n_cells());
    for dataset in 0..config.datasets.len() {
        for &noise in &config.noise {
            for &p in &config.p {
                for &q in &config.q {
                    for seed in 0..config.seeds {
                        cells.push(Cell {
                            dataset,
                            noise,
                            p,
                            q,
                            seed,
                        });
                    }
                }
            }
        }
    }
    cells
}

fn noise_tag(noise: NoiseKind) -> &'static str {
    match noise {
        NoiseKind::Ncar => "ncar",
        NoiseKind::Nnar => "nnar",
    }
}

/// File stem shared by the per-cell diagnostic dumps.
pub fn cell_stem(dataset: &str, noise: NoiseKind, p: f64, q: f64, seed: u64) -> String {
    format!("{dataset}_{}_p{p}_q{q}_s{seed}", noise_tag(noise))
}

pub fn diagnostics_dir(out_dir: &Path, config: &ExperimentConfig) -> PathBuf {
    out_dir.join(format!("diagnostics-{}", config.hash()))
}

pub fn config_snapshot_path(out_dir: &Path, hash: &str) -> PathBuf {
    out_dir.join(format!("config-{hash}.toml"))
}

/// The config snapshot written next to a `results-<hash>.csv` file.
pub fn config_for_results(results: &Path) -> Result<ExperimentConfig> {
    let stem = results
        .file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.strip_prefix("results-"))
        .ok_or_else(|| BenchError::Config(format!("{} is not a results-<hash>.csv file", results.display())))?;
    let dir = results.parent().unwrap_or(Path::new("."));
    ExperimentConfig::load(&config_snapshot_path(dir, stem))
}

fn same_key(r: &ResultRecord, name: &str, cell: &Cell, method: irbl::biquality::Method) -> bool {
    r.dataset == name && r.method == method && r.noise == cell.noise && r.p == cell.p && r.q == cell.q && r.seed == cell.seed
}

/// Number of leading cells fully present in `text`, and the byte length of
/// that prefix (header included).
fn complete_prefix(text: &str, config: &ExperimentConfig, cells: &[Cell]) -> (usize, usize) {
    let header_len = RESULTS_HEADER.len() + 1;
    if !text.starts_with(&format!("{RESULTS_HEADER}\n")) {
        return (0, 0);
    }
    let k = config.methods.len();
    let mut offset = header_len;
    let mut prefix = header_len;
    let mut done = 0;
    let mut in_cell = 0;
    for line in text[header_len..].split_inclusive('\n') {
        if !line.ends_with('\n') || done >= cells.len() {
            break;
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(line.as_bytes());
        let Some(Ok(rec)) = reader.records().next() else {
            break;
        };
        let cell = &cells[done];
        let name = &config.datasets[cell.dataset].name;
        match parse_record(&rec) {
            Ok(r) if same_key(&r, name, cell, config.methods[in_cell]) => {}
            _ => break,
        }
        offset += line.len();
        in_cell += 1;
        if in_cell == k {
            in_cell = 0;
            done += 1;
            prefix = offset;
        }
    }
    (done, prefix)
}

fn load_datasets(sources: &[DatasetSource], base_dir: Option<&Path>) -> Vec<std::result::Result<Dataset, String>> {
    sources
        .iter()
        .map(|s| {
            s.load(base_dir).map_err(|e| {
                log::error!("dataset {}: {e}", s.name);
                format!("cannot load dataset: {e}")
            })
        })
        .collect()
}

fn failed_cell(config: &ExperimentConfig, cell: &Cell, reason: &str) -> CellOutput {
    let records = config
        .methods
        .iter()
        .map(|&method| ResultRecord {
            dataset: config.datasets[cell.dataset].name.clone(),
            method,
            noise: cell.noise,
            p: cell.p,
            q: cell.q,
            seed: cell.seed,
            accuracy: None,
            wall_time_s: 0.0,
            status: Status::Failed,
            reason: reason.to_string(),
        })
        .collect();
    CellOutput {
        records,
        ..CellOutput::default()
    }
}

/// Run one cell of `config` in isolation, exactly as the sweep would.
pub fn run_config_cell(config: &ExperimentConfig, data: &Dataset, cell: &Cell) -> CellOutput {
    let ctx = CellContext {
        name: &config.datasets[cell.dataset].name,
        data,
        methods: &config.methods,
        sgd: &config.sgd,
        base_seed: config.base_seed,
        record_wall_time: config.record_wall_time,
    };
    let mut out = run_cell(&ctx, cell);
    for r in &mut out.records {
        // keep one record per line
        r.reason = r.reason.replace(['\n', '\r'], " ");
    }
    out
}

struct Writer {
    file: File,
    path: PathBuf,
    diagnostics: Option<PathBuf>,
    failed: usize,
}

impl Writer {
    fn write_cell(&mut self, config: &ExperimentConfig, cell: &Cell, out: &CellOutput) -> Result<()> {
        self.failed += out.records.iter().filter(|r| !r.is_ok()).count();
        self.file
            .write_all(records_to_csv(&out.records).as_bytes())
            .and_then(|_| self.file.flush())
            .at(&self.path)?;
        if let Some(dir) = &self.diagnostics {
            let stem = cell_stem(&config.datasets[cell.dataset].name, cell.noise, cell.p, cell.q, cell.seed);
            if let Some(beta) = &out.beta {
                let path = dir.join("beta").join(format!("{stem}.csv"));
                fs::write(&path, beta.to_csv()).at(&path)?;
            }
            if let Some(c) = &out.corruption {
                let path = dir.join("corruption").join(format!("{stem}.csv"));
                fs::write(&path, c.to_csv()).at(&path)?;
            }
        }
        Ok(())
    }
}

/// Run (or resume) the sweep described by `config` into `out_dir`.
/// Relative dataset paths are resolved against `base_dir`.
pub fn run_sweep(
    config: &ExperimentConfig,
    out_dir: &Path,
    base_dir: Option<&Path>,
    options: &SweepOptions,
) -> Result<SweepSummary> {
    config.validate()?;
    fs::create_dir_all(out_dir).at(out_dir)?;
    let hash = config.hash();
    let results_path = out_dir.join(config.results_file_name());
    let snapshot = config_snapshot_path(out_dir, &hash);
    let mut resolved = config.clone();
    for d in &mut resolved.datasets {
        if let (Some(path), Some(base)) = (&d.path, base_dir) {
            if path.is_relative() {
                d.path = Some(base.join(path));
            }
        }
    }
    fs::write(&snapshot, resolved.to_toml()).at(&snapshot)?;

    let cells = enumerate_cells(config);
    let mut resumed = 0;
    let file = if options.resume && results_path.exists() {
        let text = fs::read_to_string(&results_path).at(&results_path)?;
        let (done, prefix) = complete_prefix(&text, config, &cells);
        resumed = done;
        let mut file = OpenOptions::new().write(true).open(&results_path).at(&results_path)?;
        if prefix == 0 {
            file.set_len(0).at(&results_path)?;
            writeln!(file, "{RESULTS_HEADER}").at(&results_path)?;
        } else {
            if prefix < text.len() {
                log::warn!(
                    "dropping {} trailing bytes of an incomplete cell in {}",
                    text.len() - prefix,
                    results_path.display()
                );
            }
            file.set_len(prefix as u64).at(&results_path)?;
        }
        log::info!("resuming after {done} of {} cells", cells.len());
        OpenOptions::new().append(true).open(&results_path).at(&results_path)?
    } else {
        if results_path.exists() {
            log::warn!("overwriting {}", results_path.display());
        }
        let mut file = File::create(&results_path).at(&results_path)?;
        writeln!(file, "{RESULTS_HEADER}").at(&results_path)?;
        file
    };

    let diagnostics = if config.diagnostics {
        let dir = diagnostics_dir(out_dir, config);
        for sub in ["beta", "corruption"] {
            fs::create_dir_all(dir.join(sub)).at(dir.join(sub))?;
        }
        Some(dir)
    } else {
        None
    };

    let mut pending: Vec<(usize, Cell)> = cells.iter().copied().enumerate().skip(resumed).collect();
    if let Some(limit) = options.limit {
        pending.truncate(limit);
    }
    let data = load_datasets(&config.datasets, base_dir);
    let jobs = options
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| BenchError::Config(format!("cannot start worker pool: {e}")))?;

    let mut writer = Writer {
        file,
        path: results_path.clone(),
        diagnostics,
        failed: 0,
    };
    let (tx, rx) = mpsc::sync_channel::<(usize, CellOutput)>(2 * jobs);
    let first = pending.first().map(|(i, _)| *i).unwrap_or(0);
    let n_pending = pending.len();

    let written = std::thread::scope(|scope| -> Result<usize> {
        let handle = scope.spawn(|| -> Result<usize> {
            // cells arrive in any order; write them strictly in index order
            let mut buffer = BTreeMap::new();
            let mut next = first;
            let mut written = 0;
            for (i, out) in rx {
                buffer.insert(i, out);
                while let Some(out) = buffer.remove(&next) {
                    writer.write_cell(config, &cells[next], &out)?;
                    next += 1;
                    written += 1;
                }
            }
            Ok(written)
        });
        pool.install(|| {
            pending.par_iter().for_each_with(tx, |tx, &(i, cell)| {
                let out = match &data[cell.dataset] {
                    Ok(d) => run_config_cell(config, d, &cell),
                    Err(reason) => failed_cell(config, &cell, reason),
                };
                // a closed channel means the writer failed; its error is reported below
                let _ = tx.send((i, out));
            });
        });
        handle.join().expect("writer thread panicked")
    })?;
    debug_assert_eq!(written, n_pending);

    Ok(SweepSummary {
        results_path,
        total_cells: cells.len(),
        resumed_cells: resumed,
        computed_cells: written,
        failed_records: writer.failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use irbl::biquality::Method;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::with_datasets(vec![DatasetSource::bundled("breast")]);
        c.noise = vec![NoiseKind::Ncar];
        c.p = vec![0.25];
        c.q = vec![0.0, 1.0];
        c.seeds = 2;
        c.methods = vec![Method::Trusted, Method::Irbl];
        c.record_wall_time = false;
        c
    }

    #[test]
    fn cell_order_is_seed_fastest() {
        let cells = enumerate_cells(&small());
        assert_eq!(cells.len(), 4);
        assert_eq!((cells[0].q, cells[0].seed), (0.0, 0));
        assert_eq!((cells[1].q, cells[1].seed), (0.0, 1));
        assert_eq!((cells[2].q, cells[2].seed), (1.0, 0));
    }

    #[test]
    fn prefix_detection_stops_at_partial_line() {
        let config = small();
        let cells = enumerate_cells(&config);
        let dir = tempfile::tempdir().unwrap();
        let s = run_sweep(&config, dir.path(), None, &SweepOptions::default()).unwrap();
        let text = fs::read_to_string(&s.results_path).unwrap();
        assert_eq!(complete_prefix(&text, &config, &cells), (4, text.len()));
        let lines: Vec<&str> = text.split_inclusive('\n').collect();
        // header + one full cell + half a line of the next
        let cut = lines[0].len() + lines[1].len() + lines[2].len() + 5;
        let (done, prefix) = complete_prefix(&text[..cut], &config, &cells);
        assert_eq!(done, 1);
        assert_eq!(prefix, lines[0].len() + lines[1].len() + lines[2].len());
        // a cell missing its last method is incomplete
        let cut = lines[0].len() + lines[1].len() + lines[2].len() + lines[3].len();
        assert_eq!(complete_prefix(&text[..cut], &config, &cells).0, 1);
    }
}
