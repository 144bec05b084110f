use std::io;
use std::path::PathBuf;

use ldp_longitudinal::LdpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("malformed CSV `{path}`: {reason}")]
    MalformedCsv { path: PathBuf, reason: String },

    #[error("column `{0}` has fewer than two distinct categories")]
    ConstantColumn(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Ldp(#[from] LdpError),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
