//! Retrieval-augmented matching, verification and patching of code against
//! recently disclosed CVEs.

pub mod agents;
pub mod augment;
pub mod dataflow;
mod error;
pub mod eval;
pub mod kb;
pub mod numfmt;
pub mod pipeline;
pub mod provider;
pub mod ranker;
pub mod semantic;

use serde::{Deserialize, Serialize};

pub use error::{Error, EXIT_AGENT_FORMAT, EXIT_CONFIG, EXIT_EVAL, EXIT_PROVIDER, EXIT_SCHEMA, EXIT_USAGE};

/// The snippet under analysis.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeArtifact {
    pub code: String,
    /// Developer's natural-language description of what the code should do.
    pub intent: String,
    #[serde(default)]
    pub supplementary: String,
}

impl CodeArtifact {
    pub fn new(code: impl Into<String>, intent: impl Into<String>) -> Self {
        CodeArtifact { code: code.into(), intent: intent.into(), supplementary: String::new() }
    }

    pub fn with_code(&self, code: impl Into<String>) -> Self {
        CodeArtifact { code: code.into(), ..self.clone() }
    }
}
