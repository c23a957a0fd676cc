//! Offline contextual-bandit learning with pessimism.
//!
//! The crate trains an overparameterized ReLU network online over a logged
//! dataset and acts by a lower confidence bound on its predictions. It also
//! ships linear, kernel and frozen-feature baselines, bandit environments,
//! behavior-policy data collectors, NTK diagnostics, and an experiment
//! harness that reports sub-optimality curves with confidence intervals.
//!
//! The numeric core ([`nn`], [`optim`], [`confidence`], [`linalg`]) is
//! generic over [`Scalar`]; the aliases below fix it to `f64`, which every
//! learner and the harness use.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandits;
pub mod confidence;
pub mod data;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod nn;
pub mod ntk;
pub mod optim;
pub mod policies;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Network = nn::NetworkParams<f64>;
pub type Optimizer = optim::OptimizerState<f64>;
pub type Covariance = confidence::CovarianceState<f64>;

pub type Network32 = nn::NetworkParams<f32>;
pub type Optimizer32 = optim::OptimizerState<f32>;
pub type Covariance32 = confidence::CovarianceState<f32>;
