use serde::Serialize;

use crate::validate::ValidationReport;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config schema error{}: {message}", pointer.as_deref().map(|p| format!(" at {p}")).unwrap_or_default())]
    Schema { pointer: Option<String>, message: String },
    #[error("config failed validation: {}", .0.summary())]
    Invalid(Box<ValidationReport>),
    #[error(transparent)]
    Compute(#[from] reflex_core::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed result document: {0}")]
    Document(String),
    #[error("replay diverged at {} location(s)", .0.len())]
    Diverged(Vec<String>),
}

impl RunError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        RunError::Io { context: context.into(), source }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Schema { .. } => "schema",
            RunError::Invalid(_) => "validation",
            RunError::Compute(_) => "compute",
            RunError::Io { .. } => "io",
            RunError::Document(_) => "document",
            RunError::Diverged(_) => "divergence",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Schema { .. } | RunError::Invalid(_) => 2,
            RunError::Compute(_) => 3,
            RunError::Diverged(_) => 4,
            RunError::Io { .. } | RunError::Document(_) => 1,
        }
    }

    /// Machine-readable form written as `error.json`.
    pub fn document(&self) -> ErrorDocument<'_> {
        ErrorDocument {
            error: self.kind(),
            message: self.to_string(),
            pointer: match self {
                RunError::Schema { pointer, .. } => pointer.clone(),
                RunError::Invalid(r) => r.issues.first().map(|i| i.pointer.clone()),
                _ => None,
            },
            validation: match self {
                RunError::Invalid(r) => Some(r),
                _ => None,
            },
            divergences: match self {
                RunError::Diverged(d) => Some(d),
                _ => None,
            },
            exit_code: self.exit_code(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorDocument<'a> {
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pointer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<&'a ValidationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergences: Option<&'a Vec<String>>,
    pub exit_code: i32,
}
