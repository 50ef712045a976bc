//! Verification and patching agents built on one-shot prompts from KB entries.

pub mod prompts;
pub mod response;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataflow::lexer::{significant_texts, tokenize};
use crate::dataflow::SymbolMapping;
use crate::kb::{CveEntry, SymbolDescription};
use crate::provider::{ChatRequest, Gateway, GatewayConfig, Message, ProviderError, Purpose};
use crate::CodeArtifact;
use prompts::{Template, ANON_FUNCTIONS, ANON_VARIABLES, EXAMPLE_CWE_TYPE, TARGET_CVE, TARGET_CWE_TYPE, TEMPLATES};
pub use response::DEFAULT_REPROMPTS;
use response::{ask, require_str};

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("{} reply still malformed after {attempts} attempts: {problem}", purpose.as_str())]
    Format { purpose: Purpose, attempts: u32, problem: String },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("knowledge base entry incomplete: {0}")]
    KbIncomplete(String),
    #[error("patch is identical to the input code")]
    DegeneratePatch,
    #[error("validation: {0}")]
    Validation(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationVerdict {
    pub result: bool,
    pub cot: String,
    pub root_cause: String,
    pub raw_response: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchResult {
    pub cot: String,
    pub patched_code: String,
    pub raw_response: String,
    pub attempts: u32,
}

#[derive(Serialize)]
struct VerdictBlock<'a> {
    result: bool,
    cot: &'a str,
    root_cause: &'a str,
}

#[derive(Serialize)]
struct PatchBlock<'a> {
    cot: &'a str,
    patched_code: &'a str,
}

fn anonymized(symbols: &[SymbolDescription]) -> String {
    symbols.iter().map(|s| format!("{}: {}", s.symbol, s.description)).collect::<Vec<_>>().join("\n")
}

/// `symbol -> name` lines in the entry's symbol order.
fn mapping_section(title: &str, symbols: &[SymbolDescription], map: &std::collections::BTreeMap<String, String>) -> String {
    let lines: Vec<String> = symbols
        .iter()
        .filter_map(|s| map.get(&s.symbol).map(|n| format!("{} -> {n}", s.symbol)))
        .collect();
    if lines.is_empty() {
        format!("[{title}] (none)")
    } else {
        format!("[{title}]\n{}", lines.join("\n"))
    }
}

fn user_turn(entry: &CveEntry, code: &str, supplementary: &str, vars: &std::collections::BTreeMap<String, String>, funcs: &std::collections::BTreeMap<String, String>) -> String {
    let supplementary = if supplementary.trim().is_empty() { "(none)" } else { supplementary.trim_end_matches('\n') };
    let code = code.trim_end_matches('\n');
    format!(
        "[Target Code]\n{code}\n\n[Supplementary Code]\n{supplementary}\n\n{}\n\n{}",
        mapping_section("Variable Mapping", &entry.symbolic_variables, vars),
        mapping_section("Function Mapping", &entry.symbolic_functions, funcs),
    )
}

fn fenced<T: Serialize>(cot: &str, block: &T) -> String {
    let json = serde_json::to_string_pretty(block).expect("block serializes");
    format!("Let's think step-by-step.\n{cot}\n\n```json\n{json}\n```")
}

fn system_prompt(template: Template, entry: &CveEntry) -> String {
    TEMPLATES.render(
        template,
        &[
            (TARGET_CVE, &entry.cve_id),
            (TARGET_CWE_TYPE, &entry.cwe_type),
            (EXAMPLE_CWE_TYPE, &entry.cwe_type),
            (ANON_VARIABLES, &anonymized(&entry.symbolic_variables)),
            (ANON_FUNCTIONS, &anonymized(&entry.symbolic_functions)),
        ],
    )
}

fn require(field: &str, value: &str, cve: &str) -> Result<(), AgentError> {
    if value.trim().is_empty() {
        Err(AgentError::KbIncomplete(format!("{cve} has no {field}")))
    } else {
        Ok(())
    }
}

/// System, one-shot pair from the entry, then the target turn.
pub fn build_verification_prompt(config: &GatewayConfig, entry: &CveEntry, mapping: &SymbolMapping, target: &CodeArtifact) -> Result<ChatRequest, AgentError> {
    require("verification_cot", &entry.verification_cot, &entry.cve_id)?;
    require("verification_root_cause", &entry.verification_root_cause, &entry.cve_id)?;
    let example_user = user_turn(entry, &entry.vulnerable_code, &entry.supplementary_code, &entry.entry_mapping_variables, &entry.entry_mapping_functions);
    let example_answer = fenced(
        &entry.verification_cot,
        &VerdictBlock { result: true, cot: &entry.verification_cot, root_cause: &entry.verification_root_cause },
    );
    let target_user = user_turn(entry, &target.code, &target.supplementary, &mapping.variables, &mapping.functions);
    let messages = vec![
        Message::system(system_prompt(Template::Verify, entry)),
        Message::user(example_user),
        Message::assistant(example_answer),
        Message::user(target_user),
    ];
    Ok(ChatRequest::new(config.chat_model.clone(), messages, config.agent_profile))
}

pub fn build_patch_prompt(
    config: &GatewayConfig,
    entry: &CveEntry,
    mapping: &SymbolMapping,
    target: &CodeArtifact,
    root_cause: &str,
) -> Result<ChatRequest, AgentError> {
    if root_cause.trim().is_empty() {
        return Err(AgentError::Argument("root cause is empty".into()));
    }
    require("patch_cot", &entry.patch_cot, &entry.cve_id)?;
    require("patched_code", &entry.patched_code, &entry.cve_id)?;
    require("verification_root_cause", &entry.verification_root_cause, &entry.cve_id)?;
    let example_user = format!(
        "{}\n\n[Root Cause]\n{}",
        user_turn(entry, &entry.vulnerable_code, &entry.supplementary_code, &entry.entry_mapping_variables, &entry.entry_mapping_functions),
        entry.verification_root_cause
    );
    let example_answer = fenced(&entry.patch_cot, &PatchBlock { cot: &entry.patch_cot, patched_code: &entry.patched_code });
    let target_user = format!(
        "{}\n\n[Root Cause]\n{root_cause}",
        user_turn(entry, &target.code, &target.supplementary, &mapping.variables, &mapping.functions)
    );
    let messages = vec![
        Message::system(system_prompt(Template::Patch, entry)),
        Message::user(example_user),
        Message::assistant(example_answer),
        Message::user(target_user),
    ];
    Ok(ChatRequest::new(config.chat_model.clone(), messages, config.agent_profile))
}

fn parse_verdict(v: &Value) -> Result<(bool, String, String), String> {
    let result = v.get("result").and_then(Value::as_bool).ok_or("missing boolean field `result`")?;
    let cot = require_str(v, "cot")?.to_string();
    let root_cause = require_str(v, "root_cause")?.to_string();
    if result && root_cause.trim().is_empty() {
        return Err("`root_cause` must be non-empty when `result` is true".into());
    }
    Ok((result, cot, root_cause))
}

pub fn verify(gateway: &Gateway, entry: &CveEntry, mapping: &SymbolMapping, target: &CodeArtifact, reprompts: u32) -> Result<VerificationVerdict, AgentError> {
    let req = build_verification_prompt(gateway.config(), entry, mapping, target)?;
    let ex = ask(gateway, Purpose::Verify, req, reprompts, parse_verdict)?;
    let (result, cot, root_cause) = ex.value;
    Ok(VerificationVerdict { result, cot, root_cause, raw_response: ex.raw_response, attempts: ex.attempts })
}

/// Whether two snippets differ only in whitespace and comments.
pub fn same_code(a: &str, b: &str) -> bool {
    match (tokenize(a), tokenize(b)) {
        (Ok(ta), Ok(tb)) => significant_texts(&ta) == significant_texts(&tb),
        _ => a.split_whitespace().eq(b.split_whitespace()),
    }
}

pub fn patch(
    gateway: &Gateway,
    entry: &CveEntry,
    mapping: &SymbolMapping,
    target: &CodeArtifact,
    root_cause: &str,
    reprompts: u32,
) -> Result<PatchResult, AgentError> {
    let req = build_patch_prompt(gateway.config(), entry, mapping, target, root_cause)?;
    let ex = ask(gateway, Purpose::Patch, req, reprompts, |v| {
        let cot = require_str(v, "cot")?.to_string();
        let code = require_str(v, "patched_code")?.to_string();
        if code.trim().is_empty() {
            return Err("`patched_code` is empty".into());
        }
        Ok((cot, code))
    })?;
    let (cot, patched_code) = ex.value;
    if same_code(&patched_code, &target.code) {
        return Err(AgentError::DegeneratePatch);
    }
    Ok(PatchResult { cot, patched_code, raw_response: ex.raw_response, attempts: ex.attempts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_equality_ignores_layout_and_comments() {
        assert!(same_code("a = b; // x", "a=b;"));
        assert!(!same_code("a = b;", "a = NULL;"));
    }

    #[test]
    fn mapping_section_rendering() {
        let syms = vec![
            SymbolDescription { symbol: "variable_2".into(), description: "b".into() },
            SymbolDescription { symbol: "variable_1".into(), description: "a".into() },
        ];
        let mut m = std::collections::BTreeMap::new();
        assert_eq!(mapping_section("Variable Mapping", &syms, &m), "[Variable Mapping] (none)");
        m.insert("variable_1".to_string(), "x".to_string());
        m.insert("variable_2".to_string(), "y".to_string());
        assert_eq!(mapping_section("Variable Mapping", &syms, &m), "[Variable Mapping]\nvariable_2 -> y\nvariable_1 -> x");
        assert_eq!(anonymized(&syms), "variable_2: b\nvariable_1: a");
    }
}
