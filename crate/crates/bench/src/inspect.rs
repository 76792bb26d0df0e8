//! Recompute and summarize the IRBL weights of one (dataset, p, q) slice of
//! a finished sweep.

use std::fmt::Write;
use std::path::Path;

use irbl::biquality::irbl_weights;
use irbl::noise::NoiseKind;

use crate::cell::{corrupted_split, method_seed, Cell, CellContext};
use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};
use crate::svg::five_numbers;
use crate::sweep::config_for_results;

#[derive(Debug, Clone, PartialEq)]
pub struct BetaSlice {
    pub noise: NoiseKind,
    pub seed: u64,
    pub clean: Vec<f64>,
    pub flipped: Vec<f64>,
}

/// β̂ of the untrusted examples for every noise kind and seed of the config.
pub fn beta_slices(config: &ExperimentConfig, dataset: &str, p: f64, q: f64) -> Result<Vec<BetaSlice>> {
    let index = config
        .datasets
        .iter()
        .position(|d| d.name == dataset)
        .ok_or_else(|| BenchError::Config(format!("dataset {dataset:?} is not part of this sweep")))?;
    let data = config.datasets[index].load(None)?;
    let mut out = Vec::new();
    for &noise in &config.noise {
        for seed in 0..config.seeds {
            let ctx = CellContext {
                name: dataset,
                data: &data,
                methods: &config.methods,
                sgd: &config.sgd,
                base_seed: config.base_seed,
                record_wall_time: false,
            };
            let cell = Cell {
                dataset: index,
                noise,
                p,
                q,
                seed,
            };
            let (split, corruption) = corrupted_split(&ctx, &cell)?;
            let sgd = config.sgd.with_seed(method_seed(&ctx, &cell));
            let weights = irbl_weights(&split.trusted, &split.untrusted, &sgd)?;
            let mut slice = BetaSlice {
                noise,
                seed,
                clean: vec![],
                flipped: vec![],
            };
            for (&b, &f) in weights.untrusted().iter().zip(&corruption.flipped) {
                if f {
                    slice.flipped.push(b);
                } else {
                    slice.clean.push(b);
                }
            }
            out.push(slice);
        }
    }
    Ok(out)
}

fn describe(values: &[f64]) -> String {
    match five_numbers(values) {
        None => format!("{:>6} {:>9}", 0, "-"),
        Some([mn, q1, md, q3, mx]) => {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            format!(
                "{:>6} {mean:>9.4} {mn:>9.4} {q1:>9.4} {md:>9.4} {q3:>9.4} {mx:>9.4}",
                values.len()
            )
        }
    }
}

/// Text summary of [`beta_slices`] for a results file written by a sweep.
pub fn inspect_beta(results: &Path, dataset: &str, p: f64, q: f64) -> Result<String> {
    let config = config_for_results(results)?;
    let slices = beta_slices(&config, dataset, p, q)?;
    let mut s = String::new();
    let _ = writeln!(s, "β̂ of untrusted examples: {dataset}, p = {p}, q = {q}");
    let _ = writeln!(
        s,
        "{:<6} {:>4} {:<8} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "noise", "seed", "group", "n", "mean", "min", "q1", "median", "q3", "max"
    );
    for sl in &slices {
        for (name, values) in [("clean", &sl.clean), ("flipped", &sl.flipped)] {
            let _ = writeln!(s, "{:<6} {:>4} {name:<8} {}", sl.noise.to_string(), sl.seed, describe(values));
        }
    }
    for &noise in &config.noise {
        let pool = |f: &dyn Fn(&BetaSlice) -> &Vec<f64>| -> Vec<f64> {
            slices.iter().filter(|s| s.noise == noise).flat_map(|s| f(s).iter().copied()).collect()
        };
        for (name, values) in [("clean", pool(&|s| &s.clean)), ("flipped", pool(&|s| &s.flipped))] {
            let _ = writeln!(s, "{:<6} {:>4} {name:<8} {}", noise.to_string(), "all", describe(&values));
        }
    }
    Ok(s)
}
