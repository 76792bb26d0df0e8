use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// A biquality task: a trusted part, an untrusted part and a held-out test set.
#[derive(Debug, Clone)]
pub struct BiqualitySplit {
    pub trusted: Dataset,
    pub untrusted: Dataset,
    pub test: Dataset,
    /// Requested trusted ratio.
    pub p: f64,
    pub seed: u64,
}

impl BiqualitySplit {
    /// Trusted ratio actually realised, `|D_T| / (|D_T| + |D_U|)`.
    pub fn realised_p(&self) -> f64 {
        let t = self.trusted.n_samples() as f64;
        t / (t + self.untrusted.n_samples() as f64)
    }

    /// `D_T ∪ D_U`, trusted rows first.
    pub fn pooled(&self) -> Result<Dataset> {
        self.trusted.concat(&self.untrusted)
    }

    /// Same split with the untrusted labels replaced.
    pub fn with_untrusted(&self, untrusted: Dataset) -> BiqualitySplit {
        BiqualitySplit {
            untrusted,
            ..self.clone()
        }
    }
}

/// Per-class sizes of the first part, by largest remainder on the quotas
/// `total * n_c / n` with `total = round(fraction * n)`. Every class with at
/// least two samples receives at least one.
fn allocate(counts: &[usize], fraction: f64) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    let total = (fraction * n as f64).round() as usize;
    let quotas: Vec<f64> = counts
        .iter()
        .map(|&c| total as f64 * c as f64 / n as f64)
        .collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = alloc.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    // Stable sort keeps ties in class order.
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra)
    });
    for &c in order.iter().take(total.saturating_sub(assigned)) {
        alloc[c] += 1;
    }

    for c in 0..counts.len() {
        if alloc[c] == 0 && counts[c] >= 2 {
            let donor = (0..counts.len())
                .filter(|&d| alloc[d] > 1)
                .max_by(|&a, &b| {
                    (alloc[a] as f64 - quotas[a]).total_cmp(&(alloc[b] as f64 - quotas[b]))
                });
            if let Some(d) = donor {
                alloc[d] -= 1;
            }
            alloc[c] = 1;
        }
    }
    alloc
}

/// Index partition behind [`stratified_split`]; both parts sorted ascending.
pub fn stratified_partition(
    labels: &[usize],
    n_classes: usize,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let alloc = allocate(&counts, fraction);

    let mut rng = seed::rng(seed);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (members, &take) in by_class.iter_mut().zip(&alloc) {
        members.shuffle(&mut rng);
        first.extend_from_slice(&members[..take]);
        second.extend_from_slice(&members[take..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((first, second))
}

/// Split into two stratified parts, the first holding `fraction` of every class.
pub fn stratified_split(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (a, b) = stratified_partition(&data.labels, data.n_classes, fraction, seed)?;
    Ok((data.select(&a), data.select(&b)))
}

/// Draw the trusted part of `train` with ratio `p`; the remainder becomes the
/// (still clean) untrusted part.
pub fn make_biquality(train: &Dataset, test: &Dataset, p: f64, seed: u64) -> Result<BiqualitySplit> {
    if p <= 0.0 {
        return Err(Error::Unsupported(
            "p = 0 leaves no trusted data".into(),
        ));
    }
    if p > 1.0 || p.is_nan() {
        return Err(Error::Config(format!("p must lie in (0, 1], got {p}")));
    }
    let (trusted, untrusted) = if p == 1.0 {
        (train.clone(), train.select(&[]))
    } else {
        stratified_split(train, p, seed)?
    };
    Ok(BiqualitySplit {
        trusted,
        untrusted,
        test: test.clone(),
        p,
        seed,
    })
}
