//! Error type shared by every module of the library.

use thiserror::Error;

/// Failures reported by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter set violates a type invariant.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Adaptive quadrature stopped before reaching the requested tolerance.
    #[error("quadrature did not converge: estimated error {achieved:.3e} exceeds tolerance {requested:.3e}")]
    Accuracy { achieved: f64, requested: f64 },

    /// The ODE integrator could not continue.
    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    /// A special-function evaluation failed even in log space.
    #[error("special function evaluation failed: {0}")]
    Special(String),

    /// The finite bath would be evaluated past its revival time.
    #[error("t = {t} exceeds the recurrence guard {limit} of the finite bath")]
    Recurrence { t: f64, limit: f64 },

    /// A population of exactly 0 or 1 has no finite effective temperature.
    #[error("infinite-temperature limit: {0}")]
    InfiniteTemperature(String),

    /// The requested event did not happen before the integration horizon.
    #[error("horizon t_max = {t_max} reached before {missing}")]
    Horizon { t_max: f64, missing: String },
}

pub type Result<T> = std::result::Result<T, Error>;
