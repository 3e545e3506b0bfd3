use thiserror::Error;

/// Errors raised by the modem, model and experiment layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A frame length, layer index, load or profile does not fit the scheme.
    #[error("configuration error: {0}")]
    Config(String),
    /// A numeric argument is outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),
    /// An operation was called without the data it needs.
    #[error("usage error: {0}")]
    Usage(String),
    /// An internal consistency check failed (Hermitian bookkeeping and similar).
    #[error("numerical diagnostic: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
