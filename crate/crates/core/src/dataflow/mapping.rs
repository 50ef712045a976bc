//! Data-flow cosines and symbol-to-entity mapping against a KB entry.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::describe::EntityDescriptions;
use super::dfg::EntityKind;
use crate::kb::{CveEntry, SymbolDescription};
use crate::provider::{Gateway, ProviderError};
use crate::semantic::{context_cosine, SemanticError};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SymbolMapping {
    /// Symbol (e.g. `variable_1`) to target entity name.
    pub variables: BTreeMap<String, String>,
    pub functions: BTreeMap<String, String>,
    /// Cosine that justified each assignment.
    pub scores: BTreeMap<String, f64>,
}

impl SymbolMapping {
    pub fn is_empty(&self) -> bool {
        self.variables.is_empty() && self.functions.is_empty()
    }
}

/// `(C_var, C_func)` between the target's joint documents and the entry.
/// A side with no entities contributes a neutral 0.
pub fn flow_cosines(target: &EntityDescriptions, entry: &CveEntry) -> Result<(f64, f64), SemanticError> {
    let side = |doc: &str, emb: &Option<Vec<f64>>, entry_emb: &[f64]| -> Result<f64, SemanticError> {
        if doc.is_empty() {
            return Ok(0.0);
        }
        let emb = emb.as_ref().ok_or_else(|| SemanticError::Argument("target joint document has no embedding".into()))?;
        context_cosine(emb, entry_emb)
    };
    Ok((
        side(&target.joint_variable_doc, &target.joint_variable_embedding, &entry.emb_variables)?,
        side(&target.joint_function_doc, &target.joint_function_embedding, &entry.emb_functions)?,
    ))
}

/// Greedy one-to-one assignment. All (symbol, entity) pairs are ranked by
/// descending score, then entity name, then symbol position; a pair is taken
/// when neither side is used yet. Returns `(symbol index, entity index, score)`.
pub fn greedy_assignment(scores: &[Vec<f64>], entity_names: &[&str]) -> Vec<(usize, usize, f64)> {
    let mut pairs = Vec::new();
    for (i, row) in scores.iter().enumerate() {
        for (j, s) in row.iter().enumerate() {
            pairs.push((i, j, *s));
        }
    }
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| entity_names[a.1].cmp(entity_names[b.1])).then_with(|| a.0.cmp(&b.0)));
    let mut sym_used = vec![false; scores.len()];
    let mut ent_used = vec![false; entity_names.len()];
    let mut out = Vec::new();
    for (i, j, s) in pairs {
        if !sym_used[i] && !ent_used[j] {
            sym_used[i] = true;
            ent_used[j] = true;
            out.push((i, j, s));
        }
    }
    out.sort_by_key(|p| p.0);
    out
}

fn map_kind(
    gateway: &Gateway,
    symbols: &[SymbolDescription],
    target: &EntityDescriptions,
    kind: EntityKind,
    out: &mut BTreeMap<String, String>,
    scores: &mut BTreeMap<String, f64>,
) -> Result<(), ProviderError> {
    let entities: Vec<_> = target.of_kind(kind).collect();
    if entities.is_empty() || symbols.is_empty() {
        return Ok(());
    }
    let ent_vecs = entities
        .iter()
        .map(|e| e.embedding.as_ref().ok_or_else(|| ProviderError::Argument(format!("entity `{}` has no embedding", e.name))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut matrix = Vec::new();
    for s in symbols {
        let v = gateway.embed(&s.description)?;
        let row = ent_vecs
            .iter()
            .map(|e| context_cosine(&v, e).map_err(|err| ProviderError::Response(err.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        matrix.push(row);
    }
    let names: Vec<&str> = entities.iter().map(|e| e.name.as_str()).collect();
    for (i, j, s) in greedy_assignment(&matrix, &names) {
        out.insert(symbols[i].symbol.clone(), names[j].to_string());
        scores.insert(symbols[i].symbol.clone(), s);
    }
    Ok(())
}

/// Maps each symbolic entity of `entry` to a described target entity of the same kind.
pub fn map_symbols(gateway: &Gateway, target: &EntityDescriptions, entry: &CveEntry) -> Result<SymbolMapping, ProviderError> {
    let mut m = SymbolMapping::default();
    map_kind(gateway, &entry.symbolic_variables, target, EntityKind::Variable, &mut m.variables, &mut m.scores)?;
    map_kind(gateway, &entry.symbolic_functions, target, EntityKind::Function, &mut m.functions, &mut m.scores)?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn best_total(scores: &[Vec<f64>]) -> f64 {
        // Exhaustive over injective partial assignments.
        fn go(i: usize, scores: &[Vec<f64>], used: &mut Vec<bool>) -> f64 {
            if i == scores.len() {
                return 0.0;
            }
            let mut best = go(i + 1, scores, used);
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.max(scores[i][j] + go(i + 1, scores, used));
                    used[j] = false;
                }
            }
            best
        }
        let n = scores.first().map_or(0, Vec::len);
        go(0, scores, &mut vec![false; n])
    }

    #[test]
    fn ties_prefer_smaller_entity_name() {
        let names = ["zeta", "alpha"];
        let got = greedy_assignment(&[vec![0.5, 0.5]], &names);
        assert_eq!(got, vec![(0, 1, 0.5)]);
    }

    #[test]
    fn fewer_entities_leaves_symbols_unmapped() {
        let got = greedy_assignment(&[vec![0.9], vec![0.8], vec![0.1]], &["only"]);
        assert_eq!(got, vec![(0, 0, 0.9)]);
    }

    proptest! {
        #[test]
        fn injective_and_half_optimal(
            rows in 1usize..5,
            cols in 1usize..5,
            seed in proptest::collection::vec(0.0f64..1.0, 16),
        ) {
            let scores: Vec<Vec<f64>> = (0..rows).map(|i| (0..cols).map(|j| seed[i * 4 + j]).collect()).collect();
            let names: Vec<String> = (0..cols).map(|j| format!("e{j}")).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let got = greedy_assignment(&scores, &refs);
            let mut ents: Vec<usize> = got.iter().map(|p| p.1).collect();
            ents.sort();
            ents.dedup();
            prop_assert_eq!(ents.len(), got.len());
            prop_assert_eq!(got.len(), rows.min(cols));
            let total: f64 = got.iter().map(|p| p.2).sum();
            prop_assert!(total >= 0.5 * best_total(&scores) - 1e-12);
        }
    }
}
