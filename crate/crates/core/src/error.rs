use std::path::PathBuf;

use thiserror::Error;

use crate::graph::NodeLabel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dangling edge endpoint: temporary id {0} is not in the buffer")]
    DanglingEndpoint(u64),

    #[error("label conflict for {qualified_name}: {existing} vs {incoming}")]
    LabelConflict {
        qualified_name: String,
        existing: NodeLabel,
        incoming: NodeLabel,
    },

    #[error("duplicate qualified name in registry: {0}")]
    DuplicateQualifiedName(String),

    #[error("store is locked by another writer ({path}); retry once the other indexer finishes")]
    Busy { path: PathBuf },

    #[error("query rejected: {0}")]
    QueryRejected(String),

    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("{what} not found")]
    NotFound {
        what: String,
        suggestions: Vec<String>,
    },

    #[error("path is outside the project root")]
    Containment,

    #[error("invalid pattern: {0}")]
    Pattern(String),

    #[error("schema version mismatch (found {found}, expected {expected}); re-index required")]
    SchemaMismatch { found: i64, expected: i64 },

    #[error("sqlite: {0}")]
    Sqlite(#[from] rusqlite::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Short machine-readable tag used in JSON error payloads.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::DanglingEndpoint(_) => "dangling_endpoint",
            Error::LabelConflict { .. } => "label_conflict",
            Error::DuplicateQualifiedName(_) => "duplicate_qualified_name",
            Error::Busy { .. } => "busy",
            Error::QueryRejected(_) => "query_rejected",
            Error::Parse { .. } => "parse_error",
            Error::NotFound { .. } => "not_found",
            Error::Containment => "path_containment",
            Error::Pattern(_) => "invalid_pattern",
            Error::SchemaMismatch { .. } => "schema_mismatch",
            Error::Sqlite(_) => "store",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
