//! Maximum-likelihood-type estimation for two-dimensional diffusion processes
//! observed on nonsynchronous random time grids.
//!
//! The crate builds the exact Gaussian covariance of the stacked increment
//! vector from interval overlaps, evaluates the two-stage quasi-likelihoods,
//! and exposes the asymptotic-variance machinery (scheme constants, limit
//! information matrices, local-asymptotic-normality experiment) needed to
//! verify the estimator's distributional claims by Monte Carlo.
//!
//! The crate is `no_std`-compatible (with `alloc`); everything that touches
//! files, configuration, or thread pools lives in the companion CLI crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod asymptotics;
pub mod error;
pub mod estimator;
pub mod gaussian;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod sampling;

pub use error::{CoreError, Result};
