use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("{0}")]
    EngineMismatch(String),
    #[error("numerical failure: {0}")]
    Numerical(catdecay::Error),
    #[error("{0}")]
    Analysis(catdecay::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("crosscheck failed: {0}")]
    CrosscheckFailed(String),
}

impl CliError {
    pub fn config(key: &str, reason: impl Into<String>) -> Self {
        CliError::Config { key: key.to_string(), reason: reason.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 for configuration problems, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::EngineMismatch(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Analysis(_) | CliError::Io { .. } | CliError::CrosscheckFailed(_) => 1,
        }
    }
}

impl From<catdecay::Error> for CliError {
    fn from(e: catdecay::Error) -> Self {
        match e {
            catdecay::Error::Config { key, reason } => {
                // The library names the amplitude `A`; the config file calls it `amplitude`.
                let key = if key == "A" { "amplitude".to_string() } else { key };
                CliError::Config { key, reason }
            }
            e if e.is_numerical() => CliError::Numerical(e),
            e => CliError::Analysis(e),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
