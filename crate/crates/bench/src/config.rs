//! Sweep configuration, read from TOML.

use std::path::{Path, PathBuf};

use irbl::biquality::Method;
use irbl::datasets::DatasetSource;
use irbl::models::SgdConfig;
use irbl::noise::NoiseKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, IoContext, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSource>,
    #[serde(default = "default_noise")]
    pub noise: Vec<NoiseKind>,
    #[serde(default = "default_p")]
    pub p: Vec<f64>,
    #[serde(default = "default_q")]
    pub q: Vec<f64>,
    /// Number of repetitions; seeds are `0..seeds`.
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    /// Mixed into every derived seed.
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub sgd: SgdConfig,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Dump per-cell β and corruption CSVs next to the results file.
    #[serde(default)]
    pub diagnostics: bool,
    /// Write measured fit times; when off the column is 0 and results files
    /// are byte-for-byte reproducible.
    #[serde(default = "default_true")]
    pub record_wall_time: bool,
}

fn default_noise() -> Vec<NoiseKind> {
    vec![NoiseKind::Ncar, NoiseKind::Nnar]
}

fn default_p() -> Vec<f64> {
    vec![0.02, 0.05, 0.10, 0.25]
}

fn default_q() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

fn default_seeds() -> u64 {
    5
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    /// Defaults for everything but the dataset list.
    pub fn with_datasets(datasets: Vec<DatasetSource>) -> Self {
        Self {
            datasets,
            noise: default_noise(),
            p: default_p(),
            q: default_q(),
            seeds: default_seeds(),
            base_seed: 0,
            methods: default_methods(),
            sgd: SgdConfig::default(),
            output: default_output(),
            diagnostics: false,
            record_wall_time: true,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path).at(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.datasets.is_empty() {
            return fail("no datasets");
        }
        if self.noise.is_empty() || self.p.is_empty() || self.q.is_empty() || self.methods.is_empty() {
            return fail("noise kinds, p grid, q grid and methods must be nonempty");
        }
        if self.seeds == 0 {
            return fail("seeds must be >= 1");
        }
        if let Some(p) = self.p.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(BenchError::Config(format!("p = {p} outside (0, 1]")));
        }
        if let Some(q) = self.q.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            return Err(BenchError::Config(format!("q = {q} outside [0, 1]")));
        }
        let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return fail("dataset names must be unique");
        }
        let mut methods = self.methods.clone();
        methods.sort_unstable();
        methods.dedup();
        if methods.len() != self.methods.len() {
            return fail("duplicate method");
        }
        self.sgd.validate()?;
        Ok(())
    }

    /// Digest of every field that influences results; names the results file.
    pub fn hash(&self) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            datasets: &'a [DatasetSource],
            noise: &'a [NoiseKind],
            p: &'a [f64],
            q: &'a [f64],
            seeds: u64,
            base_seed: u64,
            methods: &'a [Method],
            sgd: &'a SgdConfig,
        }
        let key = Key {
            datasets: &self.datasets,
            noise: &self.noise,
            p: &self.p,
            q: &self.q,
            seeds: self.seeds,
            base_seed: self.base_seed,
            methods: &self.methods,
            sgd: &self.sgd,
        };
        let json = serde_json::to_vec(&key).expect("serializable key");
        hex::encode(&Sha256::digest(&json)[..8])
    }

    pub fn results_file_name(&self) -> String {
        format!("results-{}.csv", self.hash())
    }

    pub fn n_cells(&self) -> usize {
        self.datasets.len() * self.noise.len() * self.p.len() * self.q.len() * self.seeds as usize
    }
}
