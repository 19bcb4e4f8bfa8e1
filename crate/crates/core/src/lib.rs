//! Asymptotically distribution-free goodness-of-fit testing for small-noise
//! diffusions `dX = S(θ, X) dt + ε dW` with a one-dimensional parametric drift.
//!
//! The pipeline is:
//!
//! 1. fit θ by the minimum distance estimator ([`mde`]),
//! 2. form the normalized residual process and its time-changed version
//!    ([`empirical`]),
//! 3. map it through the linear transformation built in [`limit_transform`]
//!    whose output is asymptotically a standard Wiener process,
//! 4. compare `Δ_ε = ∫ W̃² ` against Monte Carlo quantiles of `∫ w²`
//!    ([`calibration`]).
//!
//! [`harness`] wires the pieces into experiment drivers used by the `sngof`
//! binary.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod deterministic;
pub mod empirical;
mod error;
pub mod grid;
pub mod harness;
pub mod limit_transform;
pub mod mde;
pub mod model;
pub mod sde;

pub use calibration::QuantileTable;
pub use deterministic::{solve_flow, FlowSolution};
pub use empirical::{run_test, TestOptions, TestReport};
pub use error::{Error, Result};
pub use grid::{GridFunction, TimeGrid};
pub use limit_transform::{FredholmKernel, TransformProfile};
pub use mde::{estimate, MdeResult};
pub use model::ModelSpec;
pub use sde::{Seed, Trajectory};
