use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// The requested object would not fit in memory or exceeds a hard size cap.
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    /// The input is well-formed but carries nothing the operation can work with,
    /// e.g. a measurement record with no feasible outcome.
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
