use std::path::PathBuf;

use thiserror::Error;

/// Errors of the file formats and the command-line front end.
#[derive(Debug, Error)]
pub enum AppError {
    /// Malformed input anchored to `source:line` or `source:line:col` (1-based).
    #[error("{location}: {message}")]
    Parse { location: String, message: String },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {error}")]
    Io { path: PathBuf, error: std::io::Error },
    #[error("replay mismatch: {0}")]
    Replay(String),
    #[error(transparent)]
    Core(#[from] tcenter_core::Error),
}

impl AppError {
    pub fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        AppError::Parse { location: format!("{source_name}:{line}"), message: message.into() }
    }

    pub fn parse_at(source_name: &str, line: usize, column: usize, message: impl Into<String>) -> Self {
        AppError::Parse { location: format!("{source_name}:{line}:{column}"), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, error: std::io::Error) -> Self {
        AppError::Io { path: path.into(), error }
    }

    /// Process exit code: 2 for configuration or input problems, 3 for
    /// numerical failures, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        use tcenter_core::Error as E;
        match self {
            AppError::Parse { .. } | AppError::Input(_) => 2,
            AppError::Io { error, .. } if error.kind() == std::io::ErrorKind::NotFound => 2,
            AppError::Numerical(_) => 3,
            AppError::Core(E::Estimation(_) | E::Fit(_)) => 3,
            AppError::Core(_) => 2,
            AppError::Io { .. } | AppError::Replay(_) => 1,
        }
    }
}

impl From<tcenter_core::FitError> for AppError {
    fn from(e: tcenter_core::FitError) -> Self {
        AppError::Core(e.into())
    }
}

pub type AppResult<T> = Result<T, AppError>;
