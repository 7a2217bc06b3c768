use std::path::PathBuf;

use thiserror::Error;

use onc_core::SimError;

use crate::config::ConfigError;
use crate::policy_file::PolicyFileError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("policy file {path}: {source}")]
    PolicyFile {
        path: PathBuf,
        source: PolicyFileError,
    },
    #[error("policy file {path}: {message}")]
    InvalidPolicy { path: PathBuf, message: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{0}")]
    Usage(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Infeasible(_) => 2,
            CliError::Config(_)
            | CliError::PolicyFile { .. }
            | CliError::InvalidPolicy { .. }
            | CliError::Sim(_)
            | CliError::Usage(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io { .. } | CliError::Csv(_) => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
