//! Config-driven experiment harness around `nsync-core`: reproducible
//! simulation, estimation, Monte Carlo studies of the estimator's asymptotic
//! law, sampling-scheme constant estimation, and the likelihood-ratio
//! experiment.  The `nsync` binary is a thin wrapper over this library.

pub mod config;
pub mod error;
pub mod io;
pub mod runner;
pub mod summary;

pub use error::{CliError, ErrorKind};
