use std::path::{Path, PathBuf};

use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config field `{field}`: {message} (requires {constraint})")]
    Config {
        field: String,
        constraint: String,
        message: String,
    },

    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] syncos_core::Error),
}

impl CliError {
    pub fn config(field: &str, constraint: &str, message: impl Into<String>) -> Self {
        Self::config_owned(field.to_string(), constraint.to_string(), message.into())
    }

    pub fn config_owned(field: String, constraint: String, message: String) -> Self {
        CliError::Config {
            field,
            constraint,
            message,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Parse { .. } => 2,
            _ => 1,
        }
    }

    /// Machine-readable form printed on failure.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            CliError::Config {
                field,
                constraint,
                message,
            } => json!({
                "error": "config",
                "field": field,
                "constraint": constraint,
                "message": message,
            }),
            CliError::Parse { path, message } => json!({
                "error": "parse",
                "path": path,
                "message": message,
            }),
            CliError::Io { path, source } => json!({
                "error": "io",
                "path": path,
                "message": source.to_string(),
            }),
            CliError::Core(e) => json!({
                "error": "sampler",
                "message": e.to_string(),
            }),
        }
    }
}
