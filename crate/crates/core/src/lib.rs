//! Stochastic gradient descent for functional linear regression in a
//! reproducing kernel Hilbert space.
//!
//! The crate works in the commuting spectral model: the kernel operator and
//! the covariance operator are diagonal in one shared basis, so every object
//! (slopes, iterates, covariates) is a coefficient vector and every operator
//! is an eigenvalue sequence.

pub mod error;
pub mod harness;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod spectral;
pub mod sgd;
pub mod theory;

pub use error::{Error, Result};
