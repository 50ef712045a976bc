//! OpenAI-compatible HTTP transport.

use std::time::Duration;

use serde_json::{json, Value};

use super::{Backend, ChatRequest, ChatResponse, EmbedResponse, ProviderError, Usage, API_KEY_ENV};

pub struct HttpBackend {
    base_url: String,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(base_url: &str, api_key: String, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        HttpBackend { base_url: base_url.trim_end_matches('/').to_string(), api_key, agent }
    }

    /// Reads the credential from `AUTOPATCH_API_KEY`.
    pub fn from_env(base_url: &str, timeout: Duration) -> Result<Self, ProviderError> {
        let key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| ProviderError::Config(format!("{API_KEY_ENV} is not set")))?;
        Ok(Self::new(base_url, key, timeout))
    }

    fn post(&self, path: &str, body: Value) -> Result<Value, ProviderError> {
        let url = format!("{}/{path}", self.base_url);
        let resp = self
            .agent
            .post(&url)
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .set("Content-Type", "application/json")
            .send_json(body);
        match resp {
            Ok(r) => r.into_json::<Value>().map_err(|e| ProviderError::Response(e.to_string())),
            Err(ureq::Error::Status(code, r)) => {
                let detail = r.into_string().unwrap_or_default();
                Err(ProviderError::Transport {
                    message: format!("HTTP {code} from {url}: {}", detail.chars().take(200).collect::<String>()),
                    transient: code == 408 || code == 429 || code >= 500,
                })
            }
            Err(e) => Err(ProviderError::Transport { message: e.to_string(), transient: true }),
        }
    }
}

fn usage_of(v: &Value) -> Usage {
    let field = |k: &str| v.get("usage").and_then(|u| u.get(k)).and_then(Value::as_u64).unwrap_or(0);
    Usage { prompt_tokens: field("prompt_tokens"), completion_tokens: field("completion_tokens") }
}

pub fn chat_body(req: &ChatRequest) -> Value {
    serde_json::to_value(req).expect("request serializes")
}

pub fn parse_chat(v: &Value) -> Result<ChatResponse, ProviderError> {
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| ProviderError::Response("missing choices[0].message.content".into()))?;
    Ok(ChatResponse { text: text.to_string(), usage: usage_of(v) })
}

pub fn parse_embedding(v: &Value) -> Result<EmbedResponse, ProviderError> {
    let arr = v
        .pointer("/data/0/embedding")
        .and_then(Value::as_array)
        .ok_or_else(|| ProviderError::Response("missing data[0].embedding".into()))?;
    let vector = arr
        .iter()
        .map(|x| x.as_f64().ok_or_else(|| ProviderError::Response("non-numeric embedding component".into())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EmbedResponse { vector, usage: usage_of(v) })
}

impl Backend for HttpBackend {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        parse_chat(&self.post("chat/completions", chat_body(req))?)
    }

    fn embed(&self, model: &str, input: &str) -> Result<EmbedResponse, ProviderError> {
        parse_embedding(&self.post("embeddings", json!({ "model": model, "input": input }))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::{Message, SamplingProfile};

    #[test]
    fn wire_format() {
        let req = ChatRequest::new("gpt-4o", vec![Message::system("s"), Message::user("u")], SamplingProfile::Agent);
        let body = chat_body(&req);
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["temperature"], 0.0);
        assert!(body.get("top_p").is_none());

        let resp = json!({"choices":[{"message":{"role":"assistant","content":"hi"}}],"usage":{"prompt_tokens":5,"completion_tokens":1}});
        let parsed = parse_chat(&resp).unwrap();
        assert_eq!(parsed.text, "hi");
        assert_eq!(parsed.usage, Usage { prompt_tokens: 5, completion_tokens: 1 });
        assert!(parse_chat(&json!({})).is_err());

        let emb = parse_embedding(&json!({"data":[{"embedding":[0.5, -1]}],"usage":{"prompt_tokens":2}})).unwrap();
        assert_eq!(emb.vector, vec![0.5, -1.0]);
    }

    #[test]
    fn unreachable_endpoint_is_transient() {
        let b = HttpBackend::new("http://127.0.0.1:9", "k".into(), Duration::from_millis(200));
        match b.embed("m", "x") {
            Err(ProviderError::Transport { transient, .. }) => assert!(transient),
            other => panic!("{other:?}"),
        }
    }
}
