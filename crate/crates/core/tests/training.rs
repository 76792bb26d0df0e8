//! Training behaviour of the SGD learner and the calibrated wrapper.

mod common;

use common::{accuracy_of, blobs};
use irbl::datasets::Dataset;
use irbl::models::{
    argmax, batch_gradient, fit_calibrated, sgd_fit, LinearModel, LossKind, Objective, ProbabilisticModel, SgdConfig,
    EPSILON,
};
use irbl::seed;
use ndarray::{array, Array2};
use rand::Rng;

/// 20 points, separable with margin 1 along the first axis.
fn separable() -> Dataset {
    let mut rng = seed::rng(3);
    let n = 20;
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let features = Array2::from_shape_fn((n, 2), |(i, j)| {
        let side = if labels[i] == 1 { 1.0 } else { -1.0 };
        if j == 0 {
            side * (0.5 + rng.random::<f64>())
        } else {
            rng.random_range(-2.0..2.0)
        }
    });
    Dataset::new(features, labels, 2).unwrap()
}

/// Plain full-batch gradient descent on the unweighted logistic objective.
fn gradient_descent(data: &Dataset, steps: usize, lr: f64) -> LinearModel {
    let rows: Vec<usize> = (0..data.n_samples()).collect();
    let w = vec![1.0; rows.len()];
    let mut m = LinearModel::zeros(2, data.n_features(), LossKind::Logistic);
    for _ in 0..steps {
        let g = batch_gradient(&m, data, &rows, &w, &Objective::Loss(LossKind::Logistic), 0.0, rows.len() as f64);
        m.weights.scaled_add(-lr, &g.weights);
        m.bias.scaled_add(-lr, &g.bias);
    }
    m
}

fn raw_predict<'a>(m: &'a LinearModel, d: &'a Dataset) -> impl Fn(usize) -> usize + 'a {
    move |i| argmax(m.score(d.row(i)).unwrap().as_slice().unwrap())
}

#[test]
fn separable_toy_is_fit_exactly() {
    let data = separable();
    let oracle = gradient_descent(&data, 5000, 1.0);
    assert_eq!(accuracy_of(raw_predict(&oracle, &data), &data), 1.0);
    let sgd = sgd_fit(&data, &[1.0; 20], &SgdConfig::default(), LossKind::Logistic).unwrap();
    assert_eq!(accuracy_of(raw_predict(&sgd, &data), &data), 1.0);
    for i in 0..20 {
        assert_eq!(raw_predict(&sgd, &data)(i), raw_predict(&oracle, &data)(i));
    }
}

#[test]
fn duplicating_a_row_equals_doubling_its_weight_in_full_batch() {
    let data = separable();
    let config = SgdConfig {
        batch_size: 64,
        epochs: 30,
        learning_rate: 0.1,
        ..SgdConfig::default()
    };
    let mut idx: Vec<usize> = (0..20).collect();
    idx.push(7);
    let dup = data.select(&idx);
    let a = sgd_fit(&dup, &[1.0; 21], &config, LossKind::Logistic).unwrap();
    let mut w = vec![1.0; 20];
    w[7] = 2.0;
    let b = sgd_fit(&data, &w, &config, LossKind::Logistic).unwrap();
    for (x, y) in a.weights.iter().zip(&b.weights) {
        assert!((x - y).abs() < 1e-12);
    }
    for (x, y) in a.bias.iter().zip(&b.bias) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn fits_are_bit_identical_for_the_same_seed() {
    let data = blobs(300, 2.0, 4);
    let config = SgdConfig::default().with_seed(9);
    let w: Vec<f64> = (0..300).map(|i| 0.5 + (i % 3) as f64).collect();
    let a = fit_calibrated(&data, &w, &config, LossKind::Logistic).unwrap();
    let b = fit_calibrated(&data, &w, &config, LossKind::Logistic).unwrap();
    assert_eq!(a, b);
}

#[test]
fn calibrated_separated_data_favours_the_true_class() {
    let data = blobs(400, 8.0, 5);
    let m = fit_calibrated(&data, &[1.0; 400], &SgdConfig::default(), LossKind::Logistic).unwrap();
    for i in 0..data.n_samples() {
        let p = m.predict_proba(data.row(i)).unwrap();
        assert!(p[data.labels[i]] >= 0.5);
    }
}

#[test]
fn probabilities_are_normalized_and_clipped() {
    let data = blobs(300, 1.5, 6);
    let m = fit_calibrated(&data, &[1.0; 300], &SgdConfig::default(), LossKind::Logistic).unwrap();
    let mut rng = seed::rng(7);
    for _ in 0..500 {
        let x = array![rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)];
        let p = m.predict_proba(x.view()).unwrap();
        assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
        assert_eq!(p[0], 1.0 - p[1]);
        assert!(p.iter().all(|&v| (EPSILON..=1.0 - EPSILON).contains(&v)));
    }
}

#[test]
fn multiclass_probabilities_sum_to_one() {
    let mut rng = seed::rng(8);
    let n = 300;
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let features = Array2::from_shape_fn((n, 2), |(i, j)| {
        let centre = [[0.0, 3.0], [-3.0, -2.0], [3.0, -2.0]][labels[i]][j];
        centre + common::normal(&mut rng)
    });
    let data = Dataset::new(features, labels, 3).unwrap();
    let m = fit_calibrated(&data, &vec![1.0; n], &SgdConfig::default(), LossKind::Logistic).unwrap();
    for i in 0..n {
        let p = m.predict_proba(data.row(i)).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    assert!(accuracy_of(|i| m.predict(data.row(i)).unwrap(), &data) > 0.85);
}

#[test]
fn scaling_scores_preserves_their_order() {
    let data = blobs(200, 2.0, 9);
    let m = sgd_fit(&data, &[1.0; 200], &SgdConfig::default(), LossKind::Logistic).unwrap();
    let mut scaled = m.clone();
    scaled.weights *= 3.0;
    scaled.bias *= 3.0;
    for i in 0..200 {
        assert_eq!(raw_predict(&m, &data)(i), raw_predict(&scaled, &data)(i));
    }
}
