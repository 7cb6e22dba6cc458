//! Turbo filtering for conditionally linear Gaussian (CLG) state-space
//! models: a single extended Kalman filter over the whole state runs in
//! parallel with a particle filter over the nonlinear substate, and the two
//! iteratively exchange pseudo-measurement messages within each recursion.
//!
//! The crate provides:
//!
//! * [`gaussian`] — exact Gaussian message algebra (products, affine
//!   propagation, overlap constants, marginals, mixture moment matching,
//!   sampling);
//! * [`ssm`] — the CLG model interface, linearization, a planar agent
//!   benchmark model and trajectory simulation;
//! * [`filters`] — the two turbo filters plus EKF, SIR particle filter and
//!   marginalized particle filter baselines, and complexity estimators.

pub mod error;
pub mod filters;
pub mod gaussian;
pub mod linalg;
pub mod ssm;

pub use error::{Error, Result};
