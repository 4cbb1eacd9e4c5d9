use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("numerical failure: {0}")]
    Numerical(#[from] riccati_geo::Error),
}

impl CliError {
    pub fn config(field: &str, message: impl std::fmt::Display) -> Self {
        CliError::Config(format!("{field}: {message}"))
    }

    /// Process exit code: 2 for configuration and I/O problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } | CliError::Csv { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
