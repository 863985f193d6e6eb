//! Gaussian and particle filters for nonlinear state estimation, built
//! around a hybrid Kalman filter that takes its predicted mean from the
//! unscented transform and its covariances from first-order linearization.
//!
//! - [`gaussian`]: beliefs, matrix square roots, sigma-point sets and
//!   unscented moments.
//! - [`models`]: the system trait and the benchmark systems.
//! - [`filters`]: EKF, UKF, the hybrid filter, SPUKF and SSUKF.
//! - [`particle`]: SIR particle filters with Kalman proposals.
//! - [`oracle`]: Monte-Carlo and closed-form moment oracles.
//! - [`cost`]: operation-count model and timing harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost;
pub mod error;
pub mod filters;
pub mod gaussian;
pub mod models;
pub mod oracle;
pub mod particle;

pub use error::{Error, Result};
pub use filters::{FilterKind, FilterOptions, FilterState};
pub use gaussian::{GaussianBelief, Matrix, UtParams, Vector};
pub use models::{StochasticModel, SystemModel};
pub use particle::{ParticleEnsemble, ProposalKind};
