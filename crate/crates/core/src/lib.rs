//! Bayesian optimization over domains where only a non-negative symmetric
//! similarity score is available.
//!
//! The surrogate replaces the GP kernel solve with an *influence vector*: the
//! least-squares coefficients expressing the similarity row of a query point
//! in terms of the rows of the (noise-regularised) similarity Gram matrix.
//! When the score is a positive-definite kernel this reproduces the exact GP
//! posterior, which the crate uses as a built-in correctness oracle.
//!
//! Module map:
//!
//! * [`similarity`] – similarity scores (RBF, symmetric KL between diagonal
//!   Gaussians), their gradients and a Monte Carlo gradient estimator.
//! * [`influence`] – rank-aware influence solve, predictive mean/variance,
//!   the exact GP posterior and the geometric-view verifications.
//! * [`acquisition`] – acquisition functions, fixed-point equilibrium search
//!   and batch selection.
//! * [`optimizer`] – ABO, GP-UCB and random-search loops.
//! * [`objectives`] – synthetic and Monte Carlo objectives.
//! * [`harness`] – experiment configs, history files, summaries and the
//!   verification suites behind the `abo` binary.

// `!(a > b)` rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod domain;
pub mod error;
pub mod harness;
pub mod influence;
pub mod objectives;
pub mod optimizer;
pub mod similarity;

pub use domain::Bounds;
pub use error::{AboError, Result};
