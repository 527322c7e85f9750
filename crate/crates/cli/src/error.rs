use std::path::PathBuf;

use nvsim::{ConfigReport, SimError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration:\n{0}")]
    Config(ConfigReport),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: {reason}")]
    BadTrace { path: PathBuf, reason: String },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for I/O trouble, 2 for anything the user can fix in their input.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Sim(SimError::Io(_)) => 1,
            _ => 2,
        }
    }
}

pub fn unknown_key(key: &str, valid: &[String]) -> CliError {
    CliError::Usage(format!(
        "unknown parameter `{key}`; valid keys:\n  {}",
        valid.join("\n  ")
    ))
}
