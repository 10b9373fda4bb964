use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument or configuration value violates its contract.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A value lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Pooling was asked to combine zero text lines.
    #[error("no text lines to pool")]
    NoText,

    /// A crop carries too little contrast to estimate blur from.
    #[error("no signal: {0}")]
    NoSignal(String),

    /// Input data is missing, inconsistent or malformed.
    #[error("data error: {0}")]
    Data(String),

    /// Correlation is undefined because one input has zero variance.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("glyph rendering failed: {0}")]
    Render(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
