use thiserror::Error;

/// Errors raised by the analytic and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the requested function.
    #[error("domain error: {0}")]
    Domain(String),

    /// θ is at or beyond the abscissa of convergence of the service MGF.
    #[error("θ = {theta} is outside the MGF domain (θ_max = {theta_max})")]
    MgfDomain { theta: f64, theta_max: f64 },

    /// Malformed arguments (empty intervals, non-positive rates, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A model hypothesis required by the operation does not hold.
    #[error("precondition violated: {message}")]
    Precondition { message: String, threshold: Option<f64> },

    /// The target slope cannot be reached inside the MGF domain.
    #[error("no root: target {target} exceeds the achievable supremum {supremum}")]
    RootNotFound { target: f64, supremum: f64 },

    /// The requested variant is not supported.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Numerical routine failed to reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>, threshold: Option<f64>) -> Self {
        Error::Precondition {
            message: msg.into(),
            threshold,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
