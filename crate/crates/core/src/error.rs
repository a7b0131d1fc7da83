use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown config key `{key}`; valid keys: {valid}")]
    UnknownKey { key: String, valid: String },

    #[error("invalid value for `{key}`: {invariant}")]
    InvalidValue { key: String, invariant: String },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("no action is defined at a terminal state")]
    TerminalState,

    #[error("weight vector has length {actual}, feature layout expects {expected}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("artifact is incompatible with the current configuration: {0}")]
    Incompatible(String),

    #[error("normal equations are numerically singular (ridge = {ridge}); use ridge > 0")]
    SingularSystem { ridge: f64 },

    #[error(
        "scenario filter accepted {accepted} of {attempts} attempts; \
         acceptance below 0.1% signals a misconfigured encounter geometry"
    )]
    FilterStarved { accepted: usize, attempts: u64 },

    #[error("missing prerequisite artifact {path}: {hint}")]
    MissingArtifact { path: PathBuf, hint: String },

    #[error("malformed file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(key: &str, invariant: impl Into<String>) -> Self {
        Error::InvalidValue {
            key: key.to_string(),
            invariant: invariant.into(),
        }
    }
}
