use std::path::PathBuf;

use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{message}")]
    Config { path: Option<PathBuf>, message: String },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] shape_metrics::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_internal() => 2,
            _ => 1,
        }
    }

    /// Structured form written to standard error.
    pub fn to_json(&self) -> Value {
        let mut body = serde_json::Map::new();
        let kind = match self {
            CliError::Config { .. } => "config",
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.kind(),
        };
        body.insert("kind".into(), json!(kind));
        body.insert("message".into(), json!(self.to_string()));
        match self {
            CliError::Config { path: Some(p), .. } => {
                body.insert("path".into(), json!(p));
            }
            CliError::Core(shape_metrics::Error::Format { path, .. } | shape_metrics::Error::Io { path, .. }) => {
                body.insert("path".into(), json!(path));
            }
            CliError::Core(shape_metrics::Error::Pair { i, j, .. }) => {
                body.insert("pair".into(), json!([i, j]));
            }
            _ => {}
        }
        json!({ "error": body })
    }
}
