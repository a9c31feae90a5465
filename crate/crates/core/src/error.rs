use thiserror::Error;

/// Errors raised by the channel models, the closed-form theory and the harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative or quadrature routine failed to reach its tolerance.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A quantity is mathematically undefined at the requested point.
    #[error("undefined value: {0}")]
    Undefined(String),

    /// Rejection sampling or ensemble bookkeeping gave up.
    #[error("sampling error: {0}")]
    Sampling(String),

    /// Configuration text or values were rejected.
    #[error("config error for key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("malformed record at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

impl Error {
    pub(crate) fn config(key: &str, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            msg: msg.into(),
        }
    }
}
