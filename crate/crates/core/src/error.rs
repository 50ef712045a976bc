use crate::agents::AgentError;
use crate::augment::AugmentError;
use crate::dataflow::DfgError;
use crate::eval::EvalError;
use crate::kb::KbError;
use crate::provider::ProviderError;
use crate::ranker::RankError;
use crate::semantic::SemanticError;

/// Any failure surfaced to an operator, with its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Dfg(#[from] DfgError),
    #[error(transparent)]
    Semantic(#[from] SemanticError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
}

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_SCHEMA: i32 = 4;
pub const EXIT_PROVIDER: i32 = 5;
pub const EXIT_AGENT_FORMAT: i32 = 6;
pub const EXIT_EVAL: i32 = 7;

fn provider_code(e: &ProviderError) -> i32 {
    match e {
        ProviderError::Config(_) => EXIT_CONFIG,
        _ => EXIT_PROVIDER,
    }
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => EXIT_USAGE,
            Error::Config(_) => EXIT_CONFIG,
            Error::Io(_) => EXIT_CONFIG,
            Error::Kb(KbError::Provider(p)) => provider_code(p),
            Error::Kb(_) | Error::Dfg(_) => EXIT_SCHEMA,
            Error::Provider(p) => provider_code(p),
            Error::Agent(a) => match a {
                AgentError::Provider(p) => provider_code(p),
                AgentError::KbIncomplete(_) => EXIT_SCHEMA,
                AgentError::Argument(_) => EXIT_USAGE,
                AgentError::Format { .. } | AgentError::DegeneratePatch | AgentError::Validation(_) => EXIT_AGENT_FORMAT,
            },
            Error::Semantic(s) => match s {
                SemanticError::Argument(_) => EXIT_USAGE,
                _ => EXIT_CONFIG,
            },
            Error::Rank(r) => match r {
                RankError::Argument(_) => EXIT_USAGE,
                RankError::Dataset(_) | RankError::Model(_) => EXIT_SCHEMA,
                RankError::Divergence { .. } => EXIT_EVAL,
            },
            Error::Eval(_) => EXIT_EVAL,
            Error::Augment(a) => match a {
                AugmentError::Parse(_) => EXIT_SCHEMA,
                AugmentError::Lexicon(_) => EXIT_CONFIG,
            },
        }
    }
}
