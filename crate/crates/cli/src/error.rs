use std::io;
use std::path::Path;

use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Invalid(Value),
    /// Data was written; these grid points failed.
    #[error("numerical failure at {} grid point(s)", .0.len())]
    Numerical(Vec<Value>),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CliError {
    pub fn invalid(detail: Value) -> Self {
        CliError::Invalid(detail)
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    /// Machine-readable diagnostics for stderr.
    pub fn to_json(&self) -> Value {
        match self {
            CliError::Invalid(detail) => json!({ "error": "validation", "detail": detail }),
            CliError::Numerical(points) => json!({ "error": "numerical", "failures": points }),
            CliError::Io { path, source } => {
                json!({ "error": "io", "path": path, "message": source.to_string() })
            }
        }
    }
}

/// A failed grid point.
pub fn failure(mu: f64, kappa: f64, n_th: f64, message: impl ToString) -> Value {
    json!({ "mu": mu, "kappa": kappa, "n_th": n_th, "message": message.to_string() })
}
