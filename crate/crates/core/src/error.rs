use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    /// A scenario field violates a domain invariant.
    #[error("invalid {field} on {owner}: {reason}")]
    Validation {
        owner: String,
        field: &'static str,
        reason: String,
    },

    /// The instance cannot be feasible regardless of the solver.
    #[error("infeasible by construction: {0}")]
    Infeasible(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("inconsistent frequency trace: {0}")]
    Trace(String),

    #[error("resource mismatch: {0}")]
    ResourceMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(owner: impl Into<String>, field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            owner: owner.into(),
            field,
            reason: reason.into(),
        }
    }
}
