//! Data-flow abstraction of C-like code: extraction, exchange format,
//! symbolic entity descriptions and symbol mapping.

pub mod ast;
pub mod describe;
pub mod dfg;
pub mod lexer;
pub mod mapping;
pub mod parser;

pub use describe::{describe_entities, EntityDescription, EntityDescriptions};
pub use dfg::{extract_dfg, unreachable_spans, DataFlowGraph, DfgDocument, Edge, Entity, EntityKind};
pub use mapping::{flow_cosines, map_symbols, SymbolMapping};

#[derive(Debug, thiserror::Error)]
pub enum DfgError {
    #[error("parse error at {line}:{col}: {message}")]
    Parse { line: usize, col: usize, message: String },
    #[error("empty code")]
    EmptyCode,
    #[error("invalid dfg document: {0}")]
    Schema(String),
    #[error("edge endpoint `{0}` is not a declared entity")]
    UnknownEntity(String),
}

/// Whether `name` occurs in `code` delimited by non-identifier characters.
pub fn occurs_as_identifier(code: &str, name: &str) -> bool {
    if name.is_empty() {
        return false;
    }
    let is_ident = |c: char| c.is_ascii_alphanumeric() || c == '_' || c == '$';
    let bytes = code.as_bytes();
    code.match_indices(name).any(|(i, _)| {
        let before = i.checked_sub(1).map(|j| bytes[j] as char);
        let after = bytes.get(i + name.len()).map(|b| *b as char);
        !before.is_some_and(is_ident) && !after.is_some_and(is_ident)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identifier_boundaries() {
        assert!(occurs_as_identifier("zram->table = NULL;", "table"));
        assert!(!occurs_as_identifier("zram->table_size = 0;", "table"));
        assert!(!occurs_as_identifier("mytable", "table"));
        assert!(!occurs_as_identifier("x", ""));
    }
}
