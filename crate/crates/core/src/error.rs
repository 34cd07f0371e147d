//! Error type shared by all modules of the crate.

use alloc::string::String;
use core::fmt;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, CoreError>;

/// Errors raised by model evaluation, scheme handling, covariance assembly
/// and estimation.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// A parameter vector has a coordinate outside its declared box.
    ParamOutOfBox {
        which: &'static str,
        index: usize,
        value: f64,
    },
    /// A parameter vector with the wrong number of coordinates was supplied.
    ParamDimension {
        which: &'static str,
        expected: usize,
        got: usize,
    },
    /// Parameter space construction failed (bounds, true values).
    InvalidParamSpace(String),
    /// Model construction or validation failed (ellipticity, correlation cap).
    InvalidModel(String),
    /// An observation grid violates the scheme invariants.
    InvalidScheme(String),
    /// Vector/matrix dimensions do not match.
    DimensionMismatch { expected: usize, got: usize },
    /// Cholesky factorization hit a non-positive pivot.
    NotPositiveDefinite { pivot: usize },
    /// Quadrature refinement failed to reach the target tolerance.
    QuadratureNonConvergence { achieved: f64 },
    /// A series evaluation was requested at |rho| >= 1.
    RhoOutOfRange { rho: f64 },
    /// An operation needs the true parameter values and none were declared.
    TrueValuesRequired,
    /// A limit information matrix came out non-positive-definite.
    IdentifiabilityFailure { eigenvalue: f64 },
    /// Optimization failed to produce a finite objective from any start.
    EstimationFailed(String),
    /// Invalid run configuration (replication counts, perturbation sizes...).
    ConfigError(String),
    /// Unsupported moment order for the Gaussian quadratic-form oracle.
    UnsupportedOrder { order: usize },
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::ParamOutOfBox {
                which,
                index,
                value,
            } => write!(
                f,
                "parameter {which}[{index}] = {value} lies outside the declared box"
            ),
            CoreError::ParamDimension {
                which,
                expected,
                got,
            } => write!(f, "parameter {which} has dimension {got}, expected {expected}"),
            CoreError::InvalidParamSpace(msg) => write!(f, "invalid parameter space: {msg}"),
            CoreError::InvalidModel(msg) => write!(f, "invalid model: {msg}"),
            CoreError::InvalidScheme(msg) => write!(f, "invalid sampling scheme: {msg}"),
            CoreError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            CoreError::NotPositiveDefinite { pivot } => {
                write!(f, "matrix not positive definite at pivot {pivot}")
            }
            CoreError::QuadratureNonConvergence { achieved } => {
                write!(f, "quadrature did not converge (achieved {achieved:e})")
            }
            CoreError::RhoOutOfRange { rho } => {
                write!(f, "correlation series evaluated at |rho| >= 1 (rho = {rho})")
            }
            CoreError::TrueValuesRequired => {
                write!(f, "operation requires declared true parameter values")
            }
            CoreError::IdentifiabilityFailure { eigenvalue } => write!(
                f,
                "information matrix not positive definite (eigenvalue {eigenvalue:e})"
            ),
            CoreError::EstimationFailed(msg) => write!(f, "estimation failed: {msg}"),
            CoreError::ConfigError(msg) => write!(f, "configuration error: {msg}"),
            CoreError::UnsupportedOrder { order } => {
                write!(f, "unsupported moment order {order} (supported: 2, 3, 4)")
            }
        }
    }
}

impl core::error::Error for CoreError {}
