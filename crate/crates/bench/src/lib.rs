//! Experiment harness for biquality learning: sweeps every
//! (dataset, noise, p, q, seed) cell of a config over the compared methods,
//! persists one CSV row per method, and renders tables and SVG figures.

pub mod aggregate;
pub mod cell;
pub mod config;
pub mod error;
pub mod inspect;
pub mod report;
pub mod results;
pub mod svg;
pub mod sweep;

pub use config::ExperimentConfig;
pub use error::{BenchError, Result};
