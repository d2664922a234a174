use std::path::PathBuf;

use pef_core::PefError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error("malformed {what} {path}: {source}")]
    Parse {
        what: &'static str,
        path: PathBuf,
        source: serde_json::Error,
    },

    /// The input parsed but does not describe a valid instance.
    #[error("invalid {what}: {source}")]
    Input { what: &'static str, source: PefError },

    #[error("missing config section `{0}`")]
    MissingSection(&'static str),

    #[error(transparent)]
    Numerical(#[from] PefError),

    #[error("verification failed: {}", .failed.join(", "))]
    VerificationFailed { failed: Vec<String> },
}

impl CliError {
    /// 1 for failed checks, 2 for unusable input, 3 for numerical or
    /// configuration errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerificationFailed { .. } => 1,
            CliError::Read { .. }
            | CliError::Write { .. }
            | CliError::Parse { .. }
            | CliError::Input { .. }
            | CliError::MissingSection(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
