#![allow(dead_code)]

use irbl::datasets::Dataset;
use irbl::seed;
use ndarray::Array2;
use rand::Rng;

pub fn normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Two isotropic Gaussian blobs in 2-D centred at `±(sep/2, sep/2)`,
/// alternating labels.
pub fn blobs(n: usize, sep: f64, seed_value: u64) -> Dataset {
    let mut rng = seed::rng(seed_value);
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let mut features = Array2::zeros((n, 2));
    for i in 0..n {
        let c = if labels[i] == 1 { sep / 2.0 } else { -sep / 2.0 };
        for j in 0..2 {
            features[[i, j]] = c + normal(&mut rng);
        }
    }
    Dataset::new(features, labels, 2).unwrap()
}

pub fn accuracy_of(pred: impl Fn(usize) -> usize, data: &Dataset) -> f64 {
    let correct = (0..data.n_samples()).filter(|&i| pred(i) == data.labels[i]).count();
    correct as f64 / data.n_samples() as f64
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
