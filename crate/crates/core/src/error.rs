//! Error types shared by all solver and analysis modules.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the library, grouped so callers can map them to
/// process exit codes (validation → 1, numerical → 2, consistency → 3).
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix/vector dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A documented precondition of an operation was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A state left the invariant set beyond the accepted tolerance.
    #[error("state outside invariant set: {0}")]
    Domain(String),

    /// An iterative method failed to converge, a matrix was singular,
    /// or a step size underflowed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A result contradicts a property that is guaranteed to hold; this
    /// signals numerical trouble or a bug, never user error.
    #[error("internal consistency violated: {0}")]
    InternalConsistency(String),
}

/// Coarse classification used for exit codes and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad input: shapes, preconditions, domain violations.
    Validation,
    /// Non-convergence, singularity, step underflow.
    Numerical,
    /// Contradictions of guaranteed properties.
    Consistency,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Shape(_) | Error::Precondition(_) | Error::Domain(_) => {
                ErrorCategory::Validation
            }
            Error::Numerical(_) => ErrorCategory::Numerical,
            Error::InternalConsistency(_) => ErrorCategory::Consistency,
        }
    }
}
