use std::path::{Path, PathBuf};

use thiserror::Error;

/// Driver failures, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io { .. } => 3,
        }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.to_owned(), message: e.to_string() }
    }
}

/// Classifies a core error raised while working on `path`.
pub fn classify(path: &Path, e: qcurriculum::Error) -> CliError {
    use qcurriculum::Error as E;
    match e {
        E::Io(io) => CliError::io(path, io),
        E::Format(_) | E::FingerprintMismatch { .. } => CliError::io(path, e),
        E::Numerical(_) | E::NotHermitian(_) | E::ClosureCapExceeded(_) => CliError::Numerical(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

impl From<qcurriculum::Error> for CliError {
    fn from(e: qcurriculum::Error) -> Self {
        classify(Path::new("-"), e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
