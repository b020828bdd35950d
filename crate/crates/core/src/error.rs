use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator, model, training and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range. `key` names the offending field.
    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },

    /// Indices, lengths or shapes do not fit together.
    #[error("structural error: {0}")]
    Structural(String),

    /// Input data is malformed (non-finite features, empty sets, length mismatch).
    #[error("invalid input: {0}")]
    Input(String),

    /// A dataset or grid specification is invalid.
    #[error("invalid spec: {0}")]
    Spec(String),

    #[error("gate {0} cannot carry a trainable parameter")]
    UnsupportedGate(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse {what}: {reason}")]
    Parse { what: String, reason: String },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, reason: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            reason: reason.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
