use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Data {
        context: String,
        source: emg_hmm::Error,
    },

    #[error("detection produced no activity segments")]
    NoSegments,
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn data(context: impl std::fmt::Display, source: emg_hmm::Error) -> Self {
        CliError::Data {
            context: context.to_string(),
            source,
        }
    }

    /// 2 usage, 3 data, 4 empty detection.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Data { .. } => 3,
            CliError::NoSegments => 4,
        }
    }
}
