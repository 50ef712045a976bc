//! Chat-completion and embedding client with record/replay and cost accounting.

pub mod http;
pub mod ledger;
pub mod replay;
pub mod scripted;
pub mod throttle;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use ledger::{Price, PriceTable, Purpose, Usage, UsageLedger, UsageRecord, UsageSummary};
pub use replay::{RecordingBackend, ReplayArchive, ReplayBackend};
pub use scripted::{HashingEmbedder, ScriptedBackend};
pub use throttle::Throttle;

pub const API_KEY_ENV: &str = "AUTOPATCH_API_KEY";

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("transport error: {message}")]
    Transport { message: String, transient: bool },
    #[error("replay miss: no recorded response for request {0}")]
    ReplayMiss(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("provider configuration: {0}")]
    Config(String),
    #[error("replay archive: {0}")]
    Archive(String),
    #[error("malformed provider response: {0}")]
    Response(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, messages: Vec<Message>, profile: SamplingProfile) -> Self {
        let mut req = ChatRequest { model: model.into(), messages, temperature: None, top_p: None, max_tokens: None };
        profile.apply(&mut req);
        req
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.messages.is_empty() {
            return Err(ProviderError::Argument("chat request has no messages".into()));
        }
        if let Some(i) = self.messages.iter().position(|m| m.role == Role::System) {
            if i != 0 {
                return Err(ProviderError::Argument("system message must come first".into()));
            }
        }
        if let Some(t) = self.temperature {
            if !(0.0..=2.0).contains(&t) {
                return Err(ProviderError::Argument(format!("temperature {t} outside [0, 2]")));
            }
        }
        if let Some(p) = self.top_p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(ProviderError::Argument(format!("top_p {p} outside (0, 1]")));
            }
        }
        if self.max_tokens == Some(0) {
            return Err(ProviderError::Argument("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Plain-text rendering: a header line, then one `### <role>` section per message.
    pub fn transcript(&self) -> String {
        let mut out = format!("model: {}", self.model);
        for (k, v) in [("temperature", self.temperature), ("top_p", self.top_p)] {
            if let Some(v) = v {
                out.push_str(&format!(" {k}: {v}"));
            }
        }
        if let Some(m) = self.max_tokens {
            out.push_str(&format!(" max_tokens: {m}"));
        }
        out.push('\n');
        for m in &self.messages {
            let role = match m.role {
                Role::System => "system",
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            out.push_str(&format!("\n### {role}\n{}\n", m.content));
        }
        out
    }

    /// Content hash over model, messages and sampling parameters.
    pub fn digest(&self) -> String {
        #[derive(Serialize)]
        struct Keyed<'a> {
            kind: &'static str,
            request: &'a ChatRequest,
        }
        digest_json(&Keyed { kind: "chat", request: self })
    }
}

/// Content hash of an embedding request.
pub fn embed_digest(model: &str, input: &str) -> String {
    #[derive(Serialize)]
    struct Keyed<'a> {
        kind: &'static str,
        model: &'a str,
        input: &'a str,
    }
    digest_json(&Keyed { kind: "embed", model, input })
}

fn digest_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("request serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingProfile {
    /// temperature 0.2, top_p 0.9
    Generation,
    /// temperature 0.0
    #[default]
    Agent,
    /// No sampling controls at all.
    ProviderDefault,
}

impl SamplingProfile {
    pub fn apply(self, req: &mut ChatRequest) {
        let (t, p) = match self {
            SamplingProfile::Generation => (Some(0.2), Some(0.9)),
            SamplingProfile::Agent => (Some(0.0), None),
            SamplingProfile::ProviderDefault => (None, None),
        };
        req.temperature = t;
        req.top_p = p;
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "generation" => Some(SamplingProfile::Generation),
            "agent" => Some(SamplingProfile::Agent),
            "provider-default" => Some(SamplingProfile::ProviderDefault),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub usage: Usage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vector: Vec<f64>,
    pub usage: Usage,
}

/// Anything that can answer chat and embedding requests.
pub trait Backend: Send + Sync {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, ProviderError>;
    fn embed(&self, model: &str, input: &str) -> Result<EmbedResponse, ProviderError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Attempts after the first one.
    pub retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { retries: 3, base_delay: Duration::from_millis(500) }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        self.base_delay.saturating_mul(1u32 << attempt.min(16))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    pub chat_model: String,
    pub embed_model: String,
    pub agent_profile: SamplingProfile,
    pub prices: PriceTable,
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
    pub per_minute: usize,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            chat_model: "gpt-4o".into(),
            embed_model: "text-embedding-3-small".into(),
            agent_profile: SamplingProfile::Agent,
            prices: PriceTable::default(),
            retry: RetryPolicy::default(),
            max_in_flight: 4,
            per_minute: 0,
        }
    }
}

pub struct Gateway {
    backend: Box<dyn Backend>,
    config: GatewayConfig,
    ledger: UsageLedger,
    throttle: Throttle,
}

impl Gateway {
    pub fn new(backend: Box<dyn Backend>, config: GatewayConfig) -> Self {
        let throttle = Throttle::new(config.max_in_flight, config.per_minute);
        Gateway { backend, config, ledger: UsageLedger::default(), throttle }
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn ledger(&self) -> &UsageLedger {
        &self.ledger
    }

    /// Request skeleton for an agent prompt under the configured profile.
    pub fn agent_request(&self, messages: Vec<Message>) -> ChatRequest {
        ChatRequest::new(self.config.chat_model.clone(), messages, self.config.agent_profile)
    }

    pub fn chat(&self, purpose: Purpose, req: &ChatRequest) -> Result<(String, UsageRecord), ProviderError> {
        req.validate()?;
        let resp = self.with_retries(|| self.backend.chat(req))?;
        let record = UsageRecord::new(purpose, &req.model, &req.digest(), resp.usage, self.config.prices.get(&req.model));
        self.ledger.append(record.clone());
        Ok((resp.text, record))
    }

    /// Embeds `text` and returns the vector scaled to unit length.
    pub fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::Argument("cannot embed empty text".into()));
        }
        let model = &self.config.embed_model;
        let resp = self.with_retries(|| self.backend.embed(model, text))?;
        let norm = resp.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(ProviderError::Response("embedding has zero or non-finite norm".into()));
        }
        let record = UsageRecord::new(Purpose::Embed, model, &embed_digest(model, text), resp.usage, self.config.prices.get(model));
        self.ledger.append(record);
        Ok(resp.vector.iter().map(|x| x / norm).collect())
    }

    fn with_retries<T>(&self, mut call: impl FnMut() -> Result<T, ProviderError>) -> Result<T, ProviderError> {
        let mut attempt = 0;
        loop {
            let result = {
                let _permit = self.throttle.acquire();
                call()
            };
            match result {
                Err(ProviderError::Transport { message, transient: true }) => {
                    if attempt >= self.config.retry.retries {
                        return Err(ProviderError::Transport {
                            message: format!("{message} (gave up after {} attempts)", attempt + 1),
                            transient: false,
                        });
                    }
                    std::thread::sleep(self.config.retry.delay(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct Flaky {
        failures: u32,
        calls: AtomicU32,
    }

    impl Backend for Flaky {
        fn chat(&self, _req: &ChatRequest) -> Result<ChatResponse, ProviderError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                return Err(ProviderError::Transport { message: "connection reset".into(), transient: true });
            }
            Ok(ChatResponse { text: "ok".into(), usage: Usage { prompt_tokens: 3, completion_tokens: 1 } })
        }

        fn embed(&self, _model: &str, _input: &str) -> Result<EmbedResponse, ProviderError> {
            Ok(EmbedResponse { vector: vec![3.0, 4.0], usage: Usage { prompt_tokens: 2, completion_tokens: 0 } })
        }
    }

    fn gateway(failures: u32, retries: u32) -> Gateway {
        let config = GatewayConfig {
            retry: RetryPolicy { retries, base_delay: Duration::ZERO },
            ..GatewayConfig::default()
        };
        Gateway::new(Box::new(Flaky { failures, calls: AtomicU32::new(0) }), config)
    }

    fn request() -> ChatRequest {
        ChatRequest::new("m", vec![Message::system("s"), Message::user("u")], SamplingProfile::Agent)
    }

    #[test]
    fn retries_transient_failures() {
        let gw = gateway(2, 3);
        let (text, _) = gw.chat(Purpose::Verify, &request()).unwrap();
        assert_eq!(text, "ok");
        assert_eq!(gw.ledger().len(), 1);
        let gw = gateway(2, 1);
        assert!(matches!(gw.chat(Purpose::Verify, &request()), Err(ProviderError::Transport { transient: false, .. })));
        assert!(gw.ledger().is_empty());
    }

    #[test]
    fn embeddings_are_normalized() {
        let gw = gateway(0, 0);
        assert_eq!(gw.embed("x").unwrap(), vec![0.6, 0.8]);
        assert!(matches!(gw.embed("  "), Err(ProviderError::Argument(_))));
    }

    #[test]
    fn digest_tracks_every_field() {
        let base = request();
        let mut other = base.clone();
        other.messages[1].content.push(' ');
        assert_ne!(base.digest(), other.digest());
        let mut other = base.clone();
        other.temperature = Some(0.2);
        assert_ne!(base.digest(), other.digest());
        let mut other = base.clone();
        other.model = "n".into();
        assert_ne!(base.digest(), other.digest());
        assert_eq!(base.digest(), request().digest());
        assert_ne!(embed_digest("m", "a"), embed_digest("m", "b"));
    }

    #[test]
    fn request_validation() {
        let mut r = request();
        r.messages.swap(0, 1);
        assert!(r.validate().is_err());
        let mut r = request();
        r.top_p = Some(0.0);
        assert!(r.validate().is_err());
        assert!(ChatRequest::new("m", vec![], SamplingProfile::Agent).validate().is_err());
        let g = ChatRequest::new("m", vec![Message::user("u")], SamplingProfile::Generation);
        assert_eq!((g.temperature, g.top_p), (Some(0.2), Some(0.9)));
    }
}
