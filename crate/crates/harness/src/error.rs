use std::path::PathBuf;

use dps_core::DpsError;
use dps_features::FeatureError;
use thiserror::Error;

/// Errors raised while configuring or running experiments.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] DpsError),

    #[error(transparent)]
    Features(#[from] FeatureError),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("dataset {path}: {reason}")]
    Dataset { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("split: {0}")]
    Split(String),
}

impl HarnessError {
    pub(crate) fn config(reason: impl Into<String>) -> Self {
        HarnessError::Config(reason.into())
    }

    pub fn dataset(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        HarnessError::Dataset {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
