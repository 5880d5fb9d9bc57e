use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The data handed to a factorization carries no information.
    #[error("rank zero: {0}")]
    RankZero(String),

    #[error("singular system: breakdown at pivot {pivot}")]
    Singular { pivot: usize },

    #[error("eigenvalue iteration did not converge")]
    NoConvergence,

    #[error("relative error undefined at column {column} (zero reference)")]
    UndefinedError { column: usize },

    #[error("format error in {path:?} at {location}: {reason}")]
    Format {
        path: PathBuf,
        location: String,
        reason: String,
    },

    #[error("io error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
