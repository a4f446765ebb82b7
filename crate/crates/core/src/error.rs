use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument or configuration value is out of its valid domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The input does not satisfy an operation's precondition (e.g. too few frames).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A linear system could not be solved or a matrix lost definiteness.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A time range falls outside the signal it refers to.
    #[error("out of range: {0}")]
    Range(String),

    /// A rate whose denominator is zero.
    #[error("undefined rate: {0}")]
    UndefinedRate(String),

    #[error("no alignment of {labels} labels fits into {frames} frames")]
    InfeasibleAlignment { labels: usize, frames: usize },

    /// A serialized tensor file is truncated or has a bad header.
    #[error("malformed tensor data: {0}")]
    MalformedTensor(String),

    #[error("unsupported WAV encoding: {0}")]
    UnsupportedWavFormat(String),

    #[error("malformed input at {source_name}:{line}: {message}")]
    Format {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("WAV error: {0}")]
    Wav(#[from] hound::Error),

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

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
