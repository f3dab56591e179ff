use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the estimator, controller, models and sample store.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("indicator error on level {level}: {reason}")]
    Indicator { level: usize, reason: String },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("insufficient budget {given}: at least {minimum} is required for one sample per level")]
    Budget { given: f64, minimum: f64 },

    #[error("estimator error on level {level}: {reason}")]
    Estimator { level: usize, reason: String },

    #[error("model error: {0}")]
    Model(String),

    #[error("cloud generation failed: {0}")]
    Generation(String),

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("campaign aborted: level {level} yielded no valid samples")]
    LevelAbort { level: usize },

    #[error("campaign interrupted after {executed} samples")]
    Interrupted { executed: usize },

    #[error("campaign `{0}` not found")]
    UnknownCampaign(String),

    #[error("unknown quantity of interest `{name}` (available: {})", available.join(", "))]
    UnknownQoi { name: String, available: Vec<String> },

    #[error("storage error at {path}: {source}")]
    Storage {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corrupt record in {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn storage(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Storage {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
