use std::path::PathBuf;

/// Failure of a command, tagged with its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, unreadable or inconsistent inputs.
    #[error("{0}")]
    Usage(String),
    #[error("solver failed: {0}")]
    Solver(ocpdmd::Error),
    #[error("fit failed: {0}")]
    Fit(ocpdmd::Error),
    /// Writing results failed after validation passed.
    #[error("cannot write {path:?}: {reason}")]
    Output { path: PathBuf, reason: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Fit(_) => 4,
            CliError::Output { .. } => 1,
        }
    }

    pub fn usage(msg: impl std::fmt::Display) -> Self {
        CliError::Usage(msg.to_string())
    }

    /// Library errors raised while validating inputs.
    pub fn input(e: ocpdmd::Error) -> Self {
        CliError::Usage(e.to_string())
    }

    /// Library errors raised while fitting or rolling out; argument and
    /// shape complaints still count as usage errors.
    pub fn fit(e: ocpdmd::Error) -> Self {
        match e {
            ocpdmd::Error::InvalidArgument(_)
            | ocpdmd::Error::DimensionMismatch(_)
            | ocpdmd::Error::Format { .. }
            | ocpdmd::Error::Io { .. }
            | ocpdmd::Error::Json(_) => CliError::input(e),
            other => CliError::Fit(other),
        }
    }

    pub fn output(path: impl Into<PathBuf>, e: impl std::fmt::Display) -> Self {
        CliError::Output {
            path: path.into(),
            reason: e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
