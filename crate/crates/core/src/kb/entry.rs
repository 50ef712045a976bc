use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{KbError, NORM_TOLERANCE};
use crate::dataflow::{extract_dfg, occurs_as_identifier, Edge};
use crate::numfmt;
use crate::semantic::{extract_keywords, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CweCategory {
    /// Arithmetic and type errors.
    C1,
    /// Concurrency.
    C2,
    /// Memory safety.
    C3,
    /// Validation, logic and resource handling.
    C4,
}

impl CweCategory {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "C1" => Some(CweCategory::C1),
            "C2" => Some(CweCategory::C2),
            "C3" => Some(CweCategory::C3),
            "C4" => Some(CweCategory::C4),
            _ => None,
        }
    }

    pub const ALL: [CweCategory; 4] = [CweCategory::C1, CweCategory::C2, CweCategory::C3, CweCategory::C4];
}

impl fmt::Display for CweCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// CWE identifier to category map loaded from `data/cwe_categories.txt`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CweCategories {
    map: BTreeMap<String, CweCategory>,
}

impl CweCategories {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(cwe), Some(cat), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(format!("line {}: expected `CWE-<n> <category>`", n + 1));
            };
            let cat = CweCategory::parse(cat).ok_or_else(|| format!("line {}: unknown category {cat}", n + 1))?;
            map.insert(cwe.to_string(), cat);
        }
        Ok(CweCategories { map })
    }

    pub fn builtin() -> Self {
        Self::parse(include_str!("../../data/cwe_categories.txt")).expect("bundled category map parses")
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn get(&self, cwe: &str) -> Option<CweCategory> {
        self.map.get(cwe).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolDescription {
    pub symbol: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CveEntry {
    pub cve_id: String,
    pub cwe_type: String,
    pub cwe_category: CweCategory,
    pub severity: String,
    pub description: String,
    pub keywords: BTreeSet<String>,
    pub vulnerable_code: String,
    pub patched_code: String,
    pub supplementary_code: String,
    pub dataflow_edges: Vec<Edge>,
    pub symbolic_variables: Vec<SymbolDescription>,
    pub symbolic_functions: Vec<SymbolDescription>,
    pub entry_mapping_variables: BTreeMap<String, String>,
    pub entry_mapping_functions: BTreeMap<String, String>,
    pub verification_cot: String,
    pub verification_root_cause: String,
    pub patch_cot: String,
    #[serde(serialize_with = "numfmt::serialize_vec")]
    pub emb_description: Vec<f64>,
    #[serde(serialize_with = "numfmt::serialize_vec")]
    pub emb_variables: Vec<f64>,
    #[serde(serialize_with = "numfmt::serialize_vec")]
    pub emb_functions: Vec<f64>,
}

impl CveEntry {
    /// Symbolic descriptions in ascending symbol order, blank-line separated.
    pub fn joint_doc(symbols: &[SymbolDescription]) -> String {
        let mut sorted: Vec<&SymbolDescription> = symbols.iter().collect();
        sorted.sort_by(|a, b| a.symbol.cmp(&b.symbol));
        sorted.iter().map(|s| s.description.as_str()).collect::<Vec<_>>().join("\n\n")
    }

    pub fn embedding_dim(&self) -> usize {
        self.emb_description.len()
    }
}

/// A validated document whose embeddings may still be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryDraft {
    pub entry: CveEntry,
    pub has_emb_description: bool,
    pub has_emb_variables: bool,
    pub has_emb_functions: bool,
}

const FIELDS: &[&str] = &[
    "schema",
    "cve_id",
    "cwe_type",
    "cwe_category",
    "severity",
    "description",
    "keywords",
    "vulnerable_code",
    "patched_code",
    "supplementary_code",
    "dataflow_edges",
    "symbolic_variables",
    "symbolic_functions",
    "entry_mapping_variables",
    "entry_mapping_functions",
    "verification_cot",
    "verification_root_cause",
    "patch_cot",
    "emb_description",
    "emb_variables",
    "emb_functions",
];

struct Doc<'a> {
    obj: &'a Map<String, Value>,
}

impl<'a> Doc<'a> {
    fn opt(&self, field: &str) -> Option<&'a Value> {
        self.obj.get(field).filter(|v| !v.is_null())
    }

    fn string(&self, field: &str, required: bool, non_empty: bool) -> Result<String, KbError> {
        match self.opt(field) {
            None if required => Err(KbError::schema(field, "required field is missing")),
            None => Ok(String::new()),
            Some(Value::String(s)) => {
                if non_empty && s.trim().is_empty() {
                    Err(KbError::schema(field, "must not be empty"))
                } else {
                    Ok(s.clone())
                }
            }
            Some(_) => Err(KbError::schema(field, "expected a string")),
        }
    }

    fn symbols(&self, field: &str) -> Result<Vec<SymbolDescription>, KbError> {
        let arr = match self.opt(field) {
            None => return Err(KbError::schema(field, "required field is missing")),
            Some(Value::Array(a)) => a,
            Some(_) => return Err(KbError::schema(field, "expected an array")),
        };
        if arr.is_empty() {
            return Err(KbError::schema(field, "must list at least one symbol"));
        }
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for (i, item) in arr.iter().enumerate() {
            let sd: SymbolDescription = serde_json::from_value(item.clone())
                .map_err(|e| KbError::schema(&format!("{field}[{i}]"), e.to_string()))?;
            if sd.symbol.trim().is_empty() || sd.description.trim().is_empty() {
                return Err(KbError::schema(&format!("{field}[{i}]"), "symbol and description must be non-empty"));
            }
            if !seen.insert(sd.symbol.clone()) {
                return Err(KbError::schema(&format!("{field}[{i}]"), format!("duplicate symbol {}", sd.symbol)));
            }
            out.push(sd);
        }
        Ok(out)
    }

    fn mapping(&self, field: &str, symbols: &[SymbolDescription], code: &str) -> Result<BTreeMap<String, String>, KbError> {
        let obj = match self.opt(field) {
            None => return Ok(BTreeMap::new()),
            Some(Value::Object(o)) => o,
            Some(_) => return Err(KbError::schema(field, "expected an object")),
        };
        let mut out = BTreeMap::new();
        for (symbol, name) in obj {
            let Some(name) = name.as_str() else {
                return Err(KbError::schema(&format!("{field}.{symbol}"), "expected a string"));
            };
            if !symbols.iter().any(|s| &s.symbol == symbol) {
                return Err(KbError::schema(&format!("{field}.{symbol}"), "symbol not declared in the symbolic list"));
            }
            if !occurs_as_identifier(code, name) {
                return Err(KbError::schema(&format!("{field}.{symbol}"), format!("`{name}` does not occur in vulnerable_code")));
            }
            out.insert(symbol.clone(), name.to_string());
        }
        Ok(out)
    }

    fn embedding(&self, field: &str) -> Result<Option<Vec<f64>>, KbError> {
        let arr = match self.opt(field) {
            None => return Ok(None),
            Some(Value::Array(a)) => a,
            Some(_) => return Err(KbError::schema(field, "expected an array of numbers")),
        };
        let v = arr
            .iter()
            .map(|x| x.as_f64().filter(|f| f.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| KbError::schema(field, "expected finite numbers"))?;
        if v.is_empty() {
            return Err(KbError::schema(field, "empty vector"));
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(KbError::schema(field, format!("norm {norm} is not 1")));
        }
        Ok(Some(v))
    }
}

fn id_pattern(s: &str, prefix: &str, groups: &[usize]) -> bool {
    let Some(rest) = s.strip_prefix(prefix) else { return false };
    let parts: Vec<&str> = rest.split('-').collect();
    parts.len() == groups.len()
        && parts.iter().zip(groups).all(|(p, min)| p.len() >= *min && p.chars().all(|c| c.is_ascii_digit()))
}

/// Checks `doc` field by field in schema order and reports the first failure.
/// Missing categories, keywords and edges are derived here; missing
/// embeddings are left for the store to compute.
pub fn validate_document(doc: &Value, vocabulary: &Vocabulary, categories: &CweCategories) -> Result<EntryDraft, KbError> {
    let obj = doc.as_object().ok_or_else(|| KbError::schema("$", "expected a JSON object"))?;
    if let Some(unknown) = obj.keys().find(|k| !FIELDS.contains(&k.as_str())) {
        return Err(KbError::schema(unknown, "unknown field"));
    }
    let d = Doc { obj };
    if let Some(s) = d.opt("schema") {
        if s.as_u64() != Some(1) {
            return Err(KbError::schema("schema", "unsupported schema version (expected 1)"));
        }
    }
    let cve_id = d.string("cve_id", true, true)?;
    if !id_pattern(&cve_id, "CVE-", &[4, 4]) || cve_id.matches('-').count() != 2 {
        return Err(KbError::schema("cve_id", format!("`{cve_id}` is not of the form CVE-YYYY-NNNN")));
    }
    let cwe_type = d.string("cwe_type", true, true)?;
    if !id_pattern(&cwe_type, "CWE-", &[1]) {
        return Err(KbError::schema("cwe_type", format!("`{cwe_type}` is not of the form CWE-N")));
    }
    let cwe_category = match d.opt("cwe_category") {
        None => categories
            .get(&cwe_type)
            .ok_or_else(|| KbError::schema("cwe_category", format!("absent and {cwe_type} has no category mapping")))?,
        Some(v) => v
            .as_str()
            .and_then(CweCategory::parse)
            .ok_or_else(|| KbError::schema("cwe_category", "expected one of C1, C2, C3, C4"))?,
    };
    let severity = d.string("severity", true, true)?;
    let description = d.string("description", true, true)?;
    let keywords = match d.opt("keywords") {
        None => extract_keywords(&description, vocabulary),
        Some(Value::Array(items)) => {
            let mut set = BTreeSet::new();
            for item in items {
                let k = item.as_str().ok_or_else(|| KbError::schema("keywords", "expected strings"))?.to_lowercase();
                if !vocabulary.contains(&k) {
                    return Err(KbError::schema("keywords", format!("`{k}` is not in the tag vocabulary")));
                }
                set.insert(k);
            }
            set
        }
        Some(_) => return Err(KbError::schema("keywords", "expected an array")),
    };
    let vulnerable_code = d.string("vulnerable_code", true, true)?;
    let patched_code = d.string("patched_code", true, true)?;
    let supplementary_code = d.string("supplementary_code", false, false)?;
    let dataflow_edges = match d.opt("dataflow_edges") {
        None => extract_dfg(&vulnerable_code)
            .map_err(|e| KbError::schema("dataflow_edges", format!("absent and extraction failed: {e}")))?
            .edges,
        Some(v) => serde_json::from_value::<Vec<Edge>>(v.clone()).map_err(|e| KbError::schema("dataflow_edges", e.to_string()))?,
    };
    let symbolic_variables = d.symbols("symbolic_variables")?;
    let symbolic_functions = d.symbols("symbolic_functions")?;
    let entry_mapping_variables = d.mapping("entry_mapping_variables", &symbolic_variables, &vulnerable_code)?;
    let entry_mapping_functions = d.mapping("entry_mapping_functions", &symbolic_functions, &vulnerable_code)?;
    let verification_cot = d.string("verification_cot", false, false)?;
    let verification_root_cause = d.string("verification_root_cause", false, false)?;
    let patch_cot = d.string("patch_cot", false, false)?;
    let emb_description = d.embedding("emb_description")?;
    let emb_variables = d.embedding("emb_variables")?;
    let emb_functions = d.embedding("emb_functions")?;
    let present = [("emb_description", &emb_description), ("emb_variables", &emb_variables), ("emb_functions", &emb_functions)];
    let mut first_dim = None;
    for (field, v) in present {
        if let Some(v) = v {
            match first_dim {
                None => first_dim = Some(v.len()),
                Some(d) if d != v.len() => return Err(KbError::schema(field, format!("dimension {} differs from {d}", v.len()))),
                Some(_) => {}
            }
        }
    }

    Ok(EntryDraft {
        has_emb_description: emb_description.is_some(),
        has_emb_variables: emb_variables.is_some(),
        has_emb_functions: emb_functions.is_some(),
        entry: CveEntry {
            cve_id,
            cwe_type,
            cwe_category,
            severity,
            description,
            keywords,
            vulnerable_code,
            patched_code,
            supplementary_code,
            dataflow_edges,
            symbolic_variables,
            symbolic_functions,
            entry_mapping_variables,
            entry_mapping_functions,
            verification_cot,
            verification_root_cause,
            patch_cot,
            emb_description: emb_description.unwrap_or_default(),
            emb_variables: emb_variables.unwrap_or_default(),
            emb_functions: emb_functions.unwrap_or_default(),
        },
    })
}
