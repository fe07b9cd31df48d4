use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("truncation leakage {leakage:.3e} at N={truncation} exceeds {threshold:.0e}")]
    TruncationLeakage {
        truncation: usize,
        leakage: f64,
        threshold: f64,
    },
    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),
    #[error("conditioned state norm vanished (norm^2 = {0:.3e})")]
    ZeroNorm(f64),
    #[error("two-component norm collapsed (norm^2 = {0:.3e})")]
    NormCollapse(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("no trigger clicks in the supplied records")]
    NoClicks,
    #[error("grid too small: {0}")]
    GridTooSmall(String),
}

impl Error {
    pub(crate) fn config(key: &str, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::TruncationLeakage { .. }
                | Error::ZeroNorm(_)
                | Error::NormCollapse(_)
                | Error::NotNormalized(_)
                | Error::Domain(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
