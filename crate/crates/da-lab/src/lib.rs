//! Dual averaging under noisy gradients: benchmark objectives, gradient
//! oracles, step-size schedules, optimizer loops, and the analysis toolkit
//! (convergence-bound evaluators and step-size inequality verifiers) used to
//! check the theory against simulated runs.
//!
//! All numerical code is generic over the scalar type via [`Real`]; the
//! `*64` aliases at the crate root pin the common `f64` instantiations.

// Parameter validation uses `!(x > 0)` rather than `x <= 0` so that NaN
// inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod linalg;
pub mod noise;
pub mod numeric;
pub mod objectives;
pub mod optimizers;
pub mod scalar;
pub mod schedules;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` dense matrix.
pub type Matrix64 = linalg::Matrix<f64>;
/// `f64` quadratic benchmark.
pub type Quadratic64 = objectives::QuadraticProblem<f64>;
/// `f64` least-squares benchmark.
pub type LeastSquares64 = objectives::LeastSquaresProblem<f64>;
/// `f64` box-constrained Rosenbrock benchmark.
pub type Rosenbrock64 = objectives::RosenbrockProblem<f64>;
/// `f64` problem dispatch.
pub type Problem64 = objectives::Problem<f64>;
/// `f64` gradient-oracle selection.
pub type NoiseModel64 = noise::NoiseModel<f64>;
/// `f64` step-size schedule.
pub type ScheduleParams64 = schedules::ScheduleParams<f64>;
/// `f64` run configuration.
pub type RunConfig64 = optimizers::RunConfig<f64>;
/// `f64` per-step run record.
pub type Trace64 = analysis::Trace<f64>;
