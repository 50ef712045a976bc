//! Keyword and description-context similarity.

pub mod fuzzy;
pub mod keywords;

use serde::{Deserialize, Serialize};

use crate::agents::prompts::{Template, TEMPLATES};
use crate::agents::response::{ask, require_str};
use crate::agents::AgentError;
use crate::provider::{Gateway, Message, Purpose};

pub use fuzzy::{fuzzy_intersection, fuzzy_jaccard, ratio, DEFAULT_THRESHOLD};
pub use keywords::{extract_keywords, KeywordSet, Vocabulary};

#[derive(Debug, thiserror::Error)]
pub enum SemanticError {
    #[error("tag vocabulary is empty")]
    EmptyVocabulary,
    #[error("vocabulary: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Cosine of the angle between `a` and `b`, clamped to `[-1, 1]`.
pub fn context_cosine(a: &[f64], b: &[f64]) -> Result<f64, SemanticError> {
    if a.len() != b.len() {
        return Err(SemanticError::Argument(format!("dimension mismatch: {} vs {}", a.len(), b.len())));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(SemanticError::Argument("zero vector".into()));
    }
    Ok((dot / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SummarySource {
    DeveloperProvided,
    LlmGenerated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticSummary {
    pub text: String,
    pub source: SummarySource,
}

pub fn summarize_request(gateway: &Gateway, code: &str) -> crate::provider::ChatRequest {
    let system = TEMPLATES.render(Template::Summarize, &[]);
    gateway.agent_request(vec![Message::system(system), Message::user(format!("[Target Code]\n{code}"))])
}

/// Functionality summary of `code` with security terms withheld.
pub fn summarize_target(gateway: &Gateway, code: &str, reprompts: u32) -> Result<SemanticSummary, AgentError> {
    if code.trim().is_empty() {
        return Err(AgentError::Argument("empty code".into()));
    }
    let ex = ask(gateway, Purpose::Summarize, summarize_request(gateway, code), reprompts, |v| {
        let text = require_str(v, "result")?;
        if text.trim().is_empty() {
            return Err("`result` is empty".into());
        }
        Ok(text.to_string())
    })?;
    Ok(SemanticSummary { text: ex.value, source: SummarySource::LlmGenerated })
}
