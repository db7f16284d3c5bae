use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Vector lengths or orders that do not fit together.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Invalid parameter value (negative threshold, bad loss parameter, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Predict/observe called out of order.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("horizon exhausted: t = {t} exceeds n = {n}")]
    HorizonExhausted { t: usize, n: usize },

    /// Generated sequence violates its declared class or bound.
    #[error("generation error: {0}")]
    Generation(String),

    #[error("numerical error: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by user input rather than by a failed computation.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Dimension(_))
    }
}
