//! Finite-difference gradient checks, loss symmetry, and the linearity and
//! decomposition identities of the weighted empirical risk.

mod common;

use irbl::biquality::{weighted_risk, BetaWeights, WeightSource};
use irbl::datasets::Dataset;
use irbl::models::{batch_gradient, batch_objective, unhinged_loss, LinearModel, LossKind, Objective};
use irbl::seed;
use ndarray::{Array1, Array2};
use rand::Rng;

const H: f64 = 1e-5;

fn random_problem(rng: &mut impl Rng, k: usize, d: usize, n: usize) -> (LinearModel, Dataset, Vec<f64>) {
    let model = LinearModel {
        weights: Array2::from_shape_fn((k, d), |_| rng.random_range(-1.0..1.0)),
        bias: Array1::from_shape_fn(k, |_| rng.random_range(-1.0..1.0)),
        loss: LossKind::Logistic,
    };
    let features = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0));
    let labels = (0..n).map(|_| rng.random_range(0..k)).collect();
    let data = Dataset::new(features, labels, k).unwrap();
    let weights = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
    (model, data, weights)
}

fn check(model: &LinearModel, data: &Dataset, weights: &[f64], objective: &Objective<'_>, decay: f64) -> f64 {
    let rows: Vec<usize> = (0..data.n_samples()).collect();
    let norm = data.n_samples() as f64;
    let g = batch_gradient(model, data, &rows, weights, objective, decay, norm);
    let f = |m: &LinearModel| batch_objective(m, data, &rows, weights, objective, decay, norm);
    let mut worst: f64 = 0.0;
    let mut probe = |analytic: f64, perturb: &dyn Fn(&mut LinearModel, f64)| {
        let mut plus = model.clone();
        perturb(&mut plus, H);
        let mut minus = model.clone();
        perturb(&mut minus, -H);
        let numeric = (f(&plus) - f(&minus)) / (2.0 * H);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3);
        worst = worst.max(rel);
    };
    for ((r, c), &a) in g.weights.indexed_iter() {
        probe(a, &move |m: &mut LinearModel, h| m.weights[[r, c]] += h);
    }
    for (r, &a) in g.bias.indexed_iter() {
        probe(a, &move |m: &mut LinearModel, h| m.bias[r] += h);
    }
    worst
}

#[test]
fn logistic_gradient_matches_finite_differences() {
    let mut rng = seed::rng(1);
    for draw in 0..100 {
        let k = 2 + draw % 3;
        let (model, data, w) = random_problem(&mut rng, k, 3, 6);
        let err = check(&model, &data, &w, &Objective::Loss(LossKind::Logistic), 1e-3);
        assert!(err < 1e-5, "draw {draw}: relative error {err}");
    }
}

#[test]
fn unhinged_gradient_matches_finite_differences() {
    let mut rng = seed::rng(2);
    for draw in 0..100 {
        let (mut model, data, w) = random_problem(&mut rng, 2, 3, 6);
        model.loss = LossKind::Unhinged;
        let err = check(&model, &data, &w, &Objective::Loss(LossKind::Unhinged), 1e-3);
        assert!(err < 1e-5, "draw {draw}: relative error {err}");
    }
}

#[test]
fn corrected_gradient_matches_finite_differences() {
    let mut rng = seed::rng(3);
    for draw in 0..100 {
        let k = 2 + draw % 2;
        let (model, data, w) = random_problem(&mut rng, k, 2, 6);
        let mut c = Array2::from_shape_fn((k, k), |_| rng.random_range(0.05..1.0));
        for mut row in c.rows_mut() {
            let s = row.sum();
            row /= s;
        }
        let mask: Vec<bool> = (0..6).map(|i| i % 2 == 0).collect();
        let objective = Objective::Corrected {
            transition: &c,
            corrected: &mask,
        };
        let err = check(&model, &data, &w, &objective, 0.0);
        assert!(err < 1e-5, "draw {draw}: relative error {err}");
    }
}

#[test]
fn unhinged_label_sum_is_two() {
    let mut rng = seed::rng(4);
    for _ in 0..1000 {
        let s: f64 = rng.random_range(-1e3..1e3);
        let total = unhinged_loss(s, 1.0) + unhinged_loss(s, -1.0);
        assert!((total - 2.0).abs() < 1e-12);
    }
    assert_eq!(unhinged_loss(0.5, 1.0), 0.5);
    assert_eq!(unhinged_loss(0.0, -1.0), 1.0);
}

#[test]
fn objective_is_linear_in_weights() {
    let mut rng = seed::rng(5);
    for _ in 0..50 {
        let (model, data, w1) = random_problem(&mut rng, 2, 3, 10);
        let w2: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..3.0)).collect();
        let rows: Vec<usize> = (0..10).collect();
        let obj = Objective::Loss(LossKind::Logistic);
        let f = |w: &[f64]| batch_objective(&model, &data, &rows, w, &obj, 0.0, 10.0);
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let combo: Vec<f64> = w1.iter().zip(&w2).map(|(x, y)| a * x + b * y).collect();
        assert!((f(&combo) - (a * f(&w1) + b * f(&w2))).abs() < 1e-10);
        let t: f64 = rng.random();
        let convex: Vec<f64> = w1.iter().zip(&w2).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        assert!((f(&convex) - (t * f(&w1) + (1.0 - t) * f(&w2))).abs() < 1e-10);
    }
}

fn risk_case(rng: &mut impl Rng) -> (LinearModel, Dataset, Dataset, BetaWeights) {
    let (nt, nu) = (rng.random_range(1..20), rng.random_range(1..60));
    let (model, trusted, _) = random_problem(rng, 2, 3, nt);
    let (_, untrusted, _) = random_problem(rng, 2, 3, nu);
    let mut values = vec![1.0; nt];
    values.extend((0..nu).map(|_| rng.random_range(0.0..5.0)));
    let weights = BetaWeights {
        values,
        n_trusted: nt,
        source: WeightSource::Irbl,
    };
    (model, trusted, untrusted, weights)
}

#[test]
fn pooled_risk_decomposes_by_trusted_ratio() {
    let mut rng = seed::rng(6);
    for _ in 0..100 {
        let (model, t, u, w) = risk_case(&mut rng);
        let loss = if rng.random::<bool>() { LossKind::Logistic } else { LossKind::Unhinged };
        let r = weighted_risk(&model, &t, &u, &w, loss).unwrap();
        // independent evaluation, one example at a time
        let obj = Objective::Loss(loss);
        let single = |d: &Dataset, i: usize| batch_objective(&model, d, &[i], &vec![1.0; d.n_samples()], &obj, 0.0, 1.0);
        let rt: f64 = (0..t.n_samples()).map(|i| single(&t, i)).sum::<f64>() / t.n_samples() as f64;
        let ru: f64 = (0..u.n_samples()).map(|i| w.untrusted()[i] * single(&u, i)).sum::<f64>() / u.n_samples() as f64;
        let p = t.n_samples() as f64 / (t.n_samples() + u.n_samples()) as f64;
        assert!((r.pooled - (p * rt + (1.0 - p) * ru)).abs() < 1e-10);
        assert!((r.pooled - (r.p * r.trusted + (1.0 - r.p) * r.untrusted)).abs() < 1e-10);
    }
}

#[test]
fn risk_special_cases() {
    let mut rng = seed::rng(7);
    let (model, t, u, mut w) = risk_case(&mut rng);
    let n = w.values.len();
    let nt = w.n_trusted;
    w.values = vec![1.0; n];
    let r = weighted_risk(&model, &t, &u, &w, LossKind::Logistic).unwrap();
    let all = t.concat(&u).unwrap();
    let rows: Vec<usize> = (0..n).collect();
    let plain = batch_objective(&model, &all, &rows, &vec![1.0; n], &Objective::Loss(LossKind::Logistic), 0.0, n as f64);
    assert!((r.pooled - plain).abs() < 1e-12);
    for v in &mut w.values[nt..] {
        *v = 0.0;
    }
    let r = weighted_risk(&model, &t, &u, &w, LossKind::Logistic).unwrap();
    assert!((r.pooled - r.p * r.trusted).abs() < 1e-12);
}
