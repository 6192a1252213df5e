use std::path::PathBuf;

use fracpq_core::FracPqError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}", config_message(path, *line, key, message))]
    Config { path: PathBuf, line: usize, key: String, message: String },

    #[error("cannot read {}: {source}", path.display())]
    ConfigRead { path: PathBuf, source: std::io::Error },

    #[error("missing required value `{0}` (flag --{0} or config key)")]
    Missing(String),

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Core(#[from] FracPqError),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn config_message(path: &std::path::Path, line: usize, key: &str, message: &str) -> String {
    if key.is_empty() {
        format!("{}:{line}: {message}", path.display())
    } else {
        format!("{}:{line}: field `{key}`: {message}", path.display())
    }
}

/// Process exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(FracPqError::NotConverged { .. }) => EXIT_NOT_CONVERGED,
            _ => EXIT_INVALID,
        }
    }
}
