use thiserror::Error;

/// Failure classes shared by every numerical routine in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative method failed to converge. `partial` carries the best
    /// estimate reached before giving up, when one exists.
    #[error("numeric error: {message}")]
    Numeric {
        message: String,
        partial: Option<f64>,
    },

    /// The inputs are valid on their own but the combination is not handled.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>, partial: Option<f64>) -> Self {
        Error::Numeric {
            message: msg.into(),
            partial,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
