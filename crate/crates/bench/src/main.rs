use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use irbl_bench::sweep::{run_sweep, SweepOptions};
use irbl_bench::{inspect, report, ExperimentConfig};

#[derive(Parser)]
#[command(name = "biqbench", version, about = "Biquality learning benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) a sweep.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        jobs: Option<usize>,
        /// Keep the complete cells of an existing results file.
        #[arg(long)]
        resume: bool,
        /// Stop after this many new cells.
        #[arg(long, hide = true)]
        limit: Option<usize>,
    },
    /// Write tables and figures for a results file.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize the IRBL weights of one slice of a sweep.
    InspectBeta {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
    },
}

fn run(cli: Cli) -> irbl_bench::Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            jobs,
            resume,
            limit,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let base = config.parent().map(|p| p.to_path_buf());
            let out = out.unwrap_or_else(|| match &base {
                Some(b) if cfg.output.is_relative() => b.join(&cfg.output),
                _ => cfg.output.clone(),
            });
            let summary = run_sweep(&cfg, &out, base.as_deref(), &SweepOptions { jobs, resume, limit })?;
            println!(
                "{}: {} of {} cells done ({} resumed, {} computed, {} failed rows)",
                summary.results_path.display(),
                summary.resumed_cells + summary.computed_cells,
                summary.total_cells,
                summary.resumed_cells,
                summary.computed_cells,
                summary.failed_records
            );
        }
        Command::Report { results, out } => {
            let files = report::report_from_file(&results, &out)?;
            println!("wrote {} files to {}", files.len(), out.display());
        }
        Command::InspectBeta { results, dataset, p, q } => {
            print!("{}", inspect::inspect_beta(&results, &dataset, p, q)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
