//! Fenced-JSON reply extraction and the bounded re-prompt loop shared by
//! every prompt in the pipeline.

use serde_json::Value;

use super::AgentError;
use crate::provider::{ChatRequest, Gateway, Message, Purpose};

/// Re-prompts allowed after the first malformed reply.
pub const DEFAULT_REPROMPTS: u32 = 2;

/// Body of the last ```json fenced block in `text`.
pub fn last_json_block(text: &str) -> Option<&str> {
    let open = text.rfind("```json")?;
    let body = &text[open + "```json".len()..];
    let close = body.find("```")?;
    Some(body[..close].trim())
}

/// Parses the last fenced block, tolerating `//` comments and trailing commas
/// such as those in the schema illustrations the prompts show.
pub fn parse_fenced_json(text: &str) -> Result<Value, String> {
    let block = last_json_block(text).ok_or("no ```json fenced block")?;
    match serde_json::from_str::<Value>(block) {
        Ok(v) => Ok(v),
        Err(first) => serde_json::from_str(&strip_comments_and_trailing_commas(block)).map_err(|_| format!("invalid JSON: {first}")),
    }
}

fn strip_comments_and_trailing_commas(src: &str) -> String {
    let mut out = String::with_capacity(src.len());
    let mut chars = src.chars().peekable();
    let mut in_str = false;
    while let Some(c) = chars.next() {
        if in_str {
            out.push(c);
            match c {
                '\\' => {
                    if let Some(n) = chars.next() {
                        out.push(n);
                    }
                }
                '"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => {
                in_str = true;
                out.push(c);
            }
            '/' if chars.peek() == Some(&'/') => {
                while chars.peek().is_some_and(|n| *n != '\n') {
                    chars.next();
                }
            }
            _ => out.push(c),
        }
    }
    // Drop commas that directly precede a closing bracket.
    let mut cleaned = String::with_capacity(out.len());
    let bytes: Vec<char> = out.chars().collect();
    let mut in_str = false;
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if in_str {
            if c == '\\' && i + 1 < bytes.len() {
                cleaned.push(c);
                cleaned.push(bytes[i + 1]);
                i += 2;
                continue;
            }
            if c == '"' {
                in_str = false;
            }
        } else if c == '"' {
            in_str = true;
        } else if c == ',' {
            let next = bytes[i + 1..].iter().find(|n| !n.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                i += 1;
                continue;
            }
        }
        cleaned.push(c);
        i += 1;
    }
    cleaned
}

pub fn format_reminder(problem: &str) -> String {
    format!(
        "Your previous answer could not be used: {problem}. Answer again and finish with exactly one \"```json\" fenced block that follows the requested schema."
    )
}

/// Outcome of a validated exchange.
#[derive(Debug, Clone)]
pub struct Exchange<T> {
    pub value: T,
    pub raw_response: String,
    pub attempts: u32,
}

/// Sends `request`, validating the fenced reply with `validate`. On a
/// malformed reply the previous answer and a reminder are appended and the
/// request is re-sent, up to `reprompts` times.
pub fn ask<T>(
    gateway: &Gateway,
    purpose: Purpose,
    request: ChatRequest,
    reprompts: u32,
    mut validate: impl FnMut(&Value) -> Result<T, String>,
) -> Result<Exchange<T>, AgentError> {
    let mut request = request;
    let mut attempts = 0;
    loop {
        attempts += 1;
        let (text, _) = gateway.chat(purpose, &request)?;
        let problem = match parse_fenced_json(&text).and_then(|v| validate(&v)) {
            Ok(value) => return Ok(Exchange { value, raw_response: text, attempts }),
            Err(p) => p,
        };
        if attempts > reprompts {
            return Err(AgentError::Format { purpose, attempts, problem });
        }
        request.messages.push(Message::assistant(text));
        request.messages.push(Message::user(format_reminder(&problem)));
    }
}

pub fn require_str<'a>(v: &'a Value, key: &str) -> Result<&'a str, String> {
    v.get(key).and_then(Value::as_str).ok_or_else(|| format!("missing string field `{key}`"))
}
