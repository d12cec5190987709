use thiserror::Error;

/// Errors raised while building or evaluating channel laws.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("empty input: {0}")]
    Empty(&'static str),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    /// True for errors that stem from numerical evaluation rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Quadrature { .. } | Error::Numeric(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
