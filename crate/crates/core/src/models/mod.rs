//! Linear probabilistic classifiers trained by weighted mini-batch SGD, with
//! isotonic probability calibration.

mod calibrated;
mod isotonic;
mod linear;
mod sgd;

pub use calibrated::{
    argmax, fit_calibrated, fit_calibrated_with, CalibratedModel, ProbabilisticModel,
    CALIBRATION_FOLDS,
};
pub use isotonic::{isotonic_fit, pava, IsotonicRegression, EPSILON};
pub use linear::{sign_label, unhinged_gradient, unhinged_loss, LinearModel, LossKind, Objective};
pub use sgd::{batch_gradient, batch_objective, fit_rows, sgd_fit, Gradient, SgdConfig};
