use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("reference solution: {0}")]
    Reference(String),

    #[error(transparent)]
    Core(#[from] balpa_core::Error),
}

impl BenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        BenchError::Parse { path: path.into(), line, message: message.into() }
    }

    /// Config and input-file problems map to exit code 2.
    pub fn is_config_error(&self) -> bool {
        matches!(self, BenchError::Config(_) | BenchError::Toml(_) | BenchError::Parse { .. } | BenchError::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
