//! Differentially private PLS1 regression.
//!
//! The crate fits partial least squares models whose weights, scores and
//! loadings are released through calibrated Gaussian mechanisms, and bundles
//! the pieces needed to study them: a projection attack that exposes another
//! data holder's unique variability, spectral preprocessing, simulated
//! two-holder spectra and a cross-validation / privacy-utility harness.

// `!(x > 0.0)` is how NaN gets rejected alongside out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod datagen;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod mechanism;
pub mod pls;
pub mod preprocess;
pub mod rng;

pub use attack::{attack_and_score, orthogonal_complement_weights, AttackReport};
pub use datagen::{concat_rows, gaussian_signal, simulate_two_holders, SignalSpec, TwoHolderData};
pub use dataset::Dataset;
pub use error::{Error, ErrorClass, Result};
pub use eval::{kfold_cv, privacy_utility_sweep, rmse, r2_score, train_test_split, EvalReport, GridPoint};
pub use mechanism::{
    analytic_gaussian_sigma, classic_gaussian_sigma, gaussian_privacy_profile, CalibrationMethod,
    NoiseCalibration, NoiseTarget, PrivacyBudget, SampleBounds,
};
pub use pls::{fit, predict, regression_coefficients, FitConfig, NoiseMode, NoisePlacement, PlsModel};
pub use preprocess::{AirPlsConfig, Pipeline, SgConfig, Step};
pub use rng::{gaussian_vector, RngStream};
