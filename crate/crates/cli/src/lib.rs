//! Experiment runner for the `wsqaoa` library: instance generation, batch
//! execution with resumable JSONL output, scaling fits, verification and
//! plot-ready series.

use std::path::{Path, PathBuf};

pub mod commands;
pub mod config;
pub mod store;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Verification(_) => 2,
            Self::Io { .. } | Self::Runtime(_) => 3,
        }
    }
}

impl From<wsqaoa::Error> for CliError {
    fn from(e: wsqaoa::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}
