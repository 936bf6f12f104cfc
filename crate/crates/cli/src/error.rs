use std::path::PathBuf;

use gar_core::GarError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] GarError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Core(e) if e.is_data_error() => 3,
            CliError::Core(_) => 4,
        }
    }
}

pub fn usage(flag: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("--{flag}: {reason}"))
}
