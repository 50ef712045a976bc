//! Knowledge base of disclosed CVEs.

mod entry;
mod store;

pub use entry::{validate_document, CveEntry, CweCategories, CweCategory, EntryDraft, SymbolDescription};
pub use store::{IngestContext, KbStore, Manifest};

use crate::provider::ProviderError;

/// Tolerance on stored embedding norms.
pub const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error("schema violation at `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error("entry {0} already exists")]
    Conflict(String),
    #[error("no entry {0}")]
    NotFound(String),
    #[error("store is locked for ingestion: {0}")]
    Locked(String),
    #[error("embedding dimension {found} does not match store dimension {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

impl KbError {
    pub(crate) fn schema(field: &str, message: impl Into<String>) -> Self {
        KbError::Schema { field: field.to_string(), message: message.into() }
    }

    pub(crate) fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        KbError::Io(format!("{}: {e}", path.display()))
    }
}
