//! Identifier-free role descriptions of the entities in a DFG.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::dfg::{DataFlowGraph, EntityKind};
use crate::agents::prompts::{Template, TEMPLATES};
use crate::agents::response::ask;
use crate::agents::AgentError;
use crate::provider::{ChatRequest, Gateway, Message, ProviderError, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityDescription {
    pub name: String,
    pub kind: EntityKind,
    pub description: String,
    /// Per-entity vector used for symbol mapping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EntityDescriptions {
    /// Sorted by (kind, name).
    pub entities: Vec<EntityDescription>,
    pub joint_variable_doc: String,
    pub joint_function_doc: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_variable_embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_function_embedding: Option<Vec<f64>>,
}

impl EntityDescriptions {
    pub fn from_entities(mut entities: Vec<EntityDescription>) -> Self {
        entities.sort_by(|a, b| (a.kind, &a.name).cmp(&(b.kind, &b.name)));
        let joint = |k: EntityKind| {
            entities.iter().filter(|e| e.kind == k).map(|e| e.description.as_str()).collect::<Vec<_>>().join("\n\n")
        };
        let joint_variable_doc = joint(EntityKind::Variable);
        let joint_function_doc = joint(EntityKind::Function);
        EntityDescriptions { entities, joint_variable_doc, joint_function_doc, ..Default::default() }
    }

    pub fn of_kind(&self, kind: EntityKind) -> impl Iterator<Item = &EntityDescription> {
        self.entities.iter().filter(move |e| e.kind == kind)
    }

    pub fn has_kind(&self, kind: EntityKind) -> bool {
        self.of_kind(kind).next().is_some()
    }

    /// Computes the joint and per-entity vectors that are still missing.
    pub fn embed(&mut self, gateway: &Gateway) -> Result<(), ProviderError> {
        if self.joint_variable_embedding.is_none() && !self.joint_variable_doc.is_empty() {
            self.joint_variable_embedding = Some(gateway.embed(&self.joint_variable_doc)?);
        }
        if self.joint_function_embedding.is_none() && !self.joint_function_doc.is_empty() {
            self.joint_function_embedding = Some(gateway.embed(&self.joint_function_doc)?);
        }
        for e in &mut self.entities {
            if e.embedding.is_none() {
                e.embedding = Some(gateway.embed(&e.description)?);
            }
        }
        Ok(())
    }
}

pub fn describe_request(gateway: &Gateway, kind: EntityKind, code: &str, dfg: &DataFlowGraph, supplementary: &str) -> ChatRequest {
    let template = match kind {
        EntityKind::Variable => Template::DescribeVariables,
        EntityKind::Function => Template::DescribeFunctions,
    };
    let flow = dfg.render_flow();
    let supplementary = if supplementary.trim().is_empty() { "(none)" } else { supplementary };
    let user = format!(
        "[Target Code]\n{code}\n\n[Data Flow]\n{}\n\n[Supplementary Code]\n{supplementary}",
        if flow.is_empty() { "(none)" } else { &flow }
    );
    gateway.agent_request(vec![Message::system(TEMPLATES.render(template, &[])), Message::user(user)])
}

fn parse_map(v: &Value) -> Result<Vec<(String, String)>, String> {
    let obj = v.as_object().ok_or("expected a JSON object keyed by entity name")?;
    if obj.is_empty() {
        return Err("no entity was described".into());
    }
    obj.iter()
        .map(|(k, d)| match d.as_str() {
            Some(s) if !s.trim().is_empty() => Ok((k.clone(), s.to_string())),
            _ => Err(format!("description of `{k}` is not a non-empty string")),
        })
        .collect()
}

/// Issues one description prompt per entity kind present in `dfg`.
pub fn describe_entities(
    gateway: &Gateway,
    code: &str,
    dfg: &DataFlowGraph,
    supplementary: &str,
    reprompts: u32,
) -> Result<EntityDescriptions, AgentError> {
    let mut out = Vec::new();
    for kind in [EntityKind::Variable, EntityKind::Function] {
        if dfg.entities_of(kind).next().is_none() {
            continue;
        }
        let purpose = match kind {
            EntityKind::Variable => Purpose::DescribeVariables,
            EntityKind::Function => Purpose::DescribeFunctions,
        };
        let req = describe_request(gateway, kind, code, dfg, supplementary);
        let ex = ask(gateway, purpose, req, reprompts, parse_map)?;
        for (name, description) in ex.value {
            match dfg.entity(&name) {
                None => return Err(AgentError::Validation(format!("description names `{name}`, which is not in the data-flow graph"))),
                Some(e) if e.kind != kind => continue,
                Some(_) => out.push(EntityDescription { name, kind, description, embedding: None }),
            }
        }
    }
    Ok(EntityDescriptions::from_entities(out))
}
