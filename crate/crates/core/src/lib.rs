//! Biquality learning on tabular data.
//!
//! A biquality task pairs a small trusted dataset with a larger untrusted one
//! whose labels may be corrupted. This crate provides the data plumbing, the
//! linear calibrated classifiers, label-noise generators, the importance
//! reweighting learner together with its baselines and competitors, and the
//! nonparametric tests used to compare them.

pub mod biquality;
pub mod datasets;
pub mod error;
pub mod models;
pub mod noise;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
