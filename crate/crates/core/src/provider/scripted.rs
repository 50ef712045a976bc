//! Offline backend with scripted chat replies and a feature-hashing embedder.
//!
//! Used to author replay fixtures and in tests; it has no network access.

use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::{Backend, ChatRequest, ChatResponse, EmbedResponse, ProviderError, Role, Usage};

/// Bag of word unigrams and bigrams hashed into a fixed number of signed buckets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    pub dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashingEmbedder { dim }
    }

    pub fn embed(&self, text: &str) -> Vec<f64> {
        let words: Vec<String> = text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(|w| w.to_lowercase())
            .collect();
        let mut v = vec![0.0; self.dim];
        for w in &words {
            self.add(&mut v, w, 1.0);
        }
        for pair in words.windows(2) {
            self.add(&mut v, &format!("{} {}", pair[0], pair[1]), 0.5);
        }
        if v.iter().all(|x| *x == 0.0) {
            v[0] = 1.0;
        }
        v
    }

    fn add(&self, v: &mut [f64], feature: &str, weight: f64) {
        let h = Sha256::digest(feature.as_bytes());
        let n = u64::from_le_bytes(h[..8].try_into().expect("8 bytes"));
        let sign = if h[8] & 1 == 0 { 1.0 } else { -1.0 };
        v[(n % self.dim as u64) as usize] += sign * weight;
    }
}

/// Whitespace word count; the scripted stand-in for a tokenizer.
pub fn count_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

type Matcher = Box<dyn Fn(&ChatRequest) -> bool + Send + Sync>;

struct Rule {
    matcher: Matcher,
    replies: Vec<String>,
}

pub struct ScriptedBackend {
    embedder: HashingEmbedder,
    rules: Vec<Rule>,
    cursors: Mutex<Vec<usize>>,
}

impl ScriptedBackend {
    pub fn new(dim: usize) -> Self {
        ScriptedBackend { embedder: HashingEmbedder::new(dim), rules: Vec::new(), cursors: Mutex::new(Vec::new()) }
    }

    /// Replies in sequence to requests accepted by `matcher`; the last reply repeats.
    pub fn reply_if(mut self, matcher: impl Fn(&ChatRequest) -> bool + Send + Sync + 'static, replies: &[&str]) -> Self {
        assert!(!replies.is_empty(), "a rule needs at least one reply");
        self.rules.push(Rule { matcher: Box::new(matcher), replies: replies.iter().map(|s| s.to_string()).collect() });
        self.cursors.get_mut().expect("cursor lock").push(0);
        self
    }

    /// Matches requests where any message contains `needle`.
    pub fn reply_when(self, needle: &str, replies: &[&str]) -> Self {
        let needle = needle.to_string();
        self.reply_if(move |r| r.messages.iter().any(|m| m.content.contains(&needle)), replies)
    }

    /// Matches requests whose system message contains `system` and whose
    /// `turn`-th user message (0-based) contains `user`. Retry turns come
    /// after the target turn, so they do not shift the index.
    pub fn reply_when_turn(self, system: &str, turn: usize, user: &str, replies: &[&str]) -> Self {
        let (system, user) = (system.to_string(), user.to_string());
        self.reply_if(
            move |r| {
                let sys_ok = r.messages.first().is_some_and(|m| m.role == Role::System && m.content.contains(&system));
                let target = r.messages.iter().filter(|m| m.role == Role::User).nth(turn);
                sys_ok && target.is_some_and(|m| m.content.contains(&user))
            },
            replies,
        )
    }
}

impl Backend for ScriptedBackend {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let mut cursors = self.cursors.lock().expect("cursor lock");
        for (i, rule) in self.rules.iter().enumerate() {
            if (rule.matcher)(req) {
                let idx = cursors[i].min(rule.replies.len() - 1);
                cursors[i] += 1;
                let text = rule.replies[idx].clone();
                let prompt_tokens = req.messages.iter().map(|m| count_tokens(&m.content) + 4).sum();
                let usage = Usage { prompt_tokens, completion_tokens: count_tokens(&text) };
                return Ok(ChatResponse { text, usage });
            }
        }
        Err(ProviderError::Response("no scripted reply matches the request".into()))
    }

    fn embed(&self, _model: &str, input: &str) -> Result<EmbedResponse, ProviderError> {
        Ok(EmbedResponse {
            vector: self.embedder.embed(input),
            usage: Usage { prompt_tokens: count_tokens(input), completion_tokens: 0 },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        dot / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt())
    }

    #[test]
    fn similar_texts_embed_closer() {
        let e = HashingEmbedder::new(256);
        let a = e.embed("pointer to the allocated table that is freed on failure");
        let b = e.embed("pointer to the allocated table freed when allocation fails");
        let c = e.embed("counter of received network packets in the queue");
        assert!(cosine(&a, &b) > cosine(&a, &c));
        assert_eq!(e.embed("same"), e.embed("SAME"));
        assert_eq!(e.embed("!!!")[0], 1.0);
    }
}
