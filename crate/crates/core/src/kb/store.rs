use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::entry::{validate_document, CveEntry, CweCategories};
use super::KbError;
use crate::provider::Gateway;
use crate::semantic::Vocabulary;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    /// Fixed by the first ingested entry.
    pub embedding_dim: Option<usize>,
    pub entries: Vec<String>,
}

/// What ingestion needs beyond the document itself.
pub struct IngestContext<'a> {
    /// Used to compute missing embeddings; `None` requires them to be present.
    pub gateway: Option<&'a Gateway>,
    pub vocabulary: &'a Vocabulary,
    pub categories: &'a CweCategories,
}

/// Directory-backed store: `manifest.json` plus `entries/<cve_id>.json`.
#[derive(Debug)]
pub struct KbStore {
    root: PathBuf,
    manifest: Manifest,
    entries: BTreeMap<String, CveEntry>,
}

struct LockGuard(PathBuf);

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<(), KbError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).and_then(|_| fs::rename(&tmp, path)).map_err(|e| KbError::io(path, e))
}

impl KbStore {
    /// Opens `root`, creating an empty store if it does not exist yet.
    pub fn open_or_create(root: impl Into<PathBuf>) -> Result<Self, KbError> {
        let root = root.into();
        if root.join("manifest.json").is_file() {
            return Self::open(root);
        }
        fs::create_dir_all(root.join("entries")).map_err(|e| KbError::io(&root, e))?;
        let store = KbStore { root, manifest: Manifest { schema: 1, embedding_dim: None, entries: vec![] }, entries: BTreeMap::new() };
        store.write_manifest()?;
        Ok(store)
    }

    pub fn open(root: impl Into<PathBuf>) -> Result<Self, KbError> {
        let root = root.into();
        let mpath = root.join("manifest.json");
        let text = fs::read_to_string(&mpath).map_err(|e| KbError::io(&mpath, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| KbError::schema("manifest", e.to_string()))?;
        if manifest.schema != 1 {
            return Err(KbError::schema("manifest.schema", "unsupported schema version"));
        }
        let mut entries = BTreeMap::new();
        for id in &manifest.entries {
            let path = root.join("entries").join(format!("{id}.json"));
            let text = fs::read_to_string(&path).map_err(|e| KbError::io(&path, e))?;
            let entry: CveEntry = serde_json::from_str(&text).map_err(|e| KbError::schema(id, e.to_string()))?;
            if let Some(dim) = manifest.embedding_dim {
                for v in [&entry.emb_description, &entry.emb_variables, &entry.emb_functions] {
                    if v.len() != dim {
                        return Err(KbError::Dimension { expected: dim, found: v.len() });
                    }
                }
            }
            entries.insert(id.clone(), entry);
        }
        Ok(KbStore { root, manifest, entries })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn retrieve(&self, cve_id: &str) -> Result<&CveEntry, KbError> {
        self.entries.get(cve_id).ok_or_else(|| KbError::NotFound(cve_id.to_string()))
    }

    /// All entries in ascending `cve_id` order.
    pub fn scan_candidates(&self) -> Vec<&CveEntry> {
        self.entries.values().collect()
    }

    fn write_manifest(&self) -> Result<(), KbError> {
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        write_atomic(&self.root.join("manifest.json"), &text)
    }

    fn lock(&self) -> Result<LockGuard, KbError> {
        let path = self.root.join(".ingest.lock");
        fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|_| KbError::Locked(path.display().to_string()))?;
        Ok(LockGuard(path))
    }

    /// Validates, completes and persists one entry document.
    pub fn ingest(&mut self, doc: &Value, ctx: &IngestContext<'_>) -> Result<String, KbError> {
        let _guard = self.lock()?;
        let draft = validate_document(doc, ctx.vocabulary, ctx.categories)?;
        let mut entry = draft.entry;
        if self.entries.contains_key(&entry.cve_id) {
            return Err(KbError::Conflict(entry.cve_id));
        }
        let need = |has: bool, field: &str| -> Result<Option<&Gateway>, KbError> {
            match (has, ctx.gateway) {
                (true, _) => Ok(None),
                (false, Some(g)) => Ok(Some(g)),
                (false, None) => Err(KbError::schema(field, "missing and no embedding provider is configured")),
            }
        };
        if let Some(g) = need(draft.has_emb_description, "emb_description")? {
            entry.emb_description = g.embed(&entry.description)?;
        }
        if let Some(g) = need(draft.has_emb_variables, "emb_variables")? {
            entry.emb_variables = g.embed(&CveEntry::joint_doc(&entry.symbolic_variables))?;
        }
        if let Some(g) = need(draft.has_emb_functions, "emb_functions")? {
            entry.emb_functions = g.embed(&CveEntry::joint_doc(&entry.symbolic_functions))?;
        }
        let dim = entry.emb_description.len();
        if entry.emb_variables.len() != dim || entry.emb_functions.len() != dim {
            return Err(KbError::Dimension { expected: dim, found: entry.emb_variables.len().max(entry.emb_functions.len()) });
        }
        if let Some(expected) = self.manifest.embedding_dim {
            if dim != expected {
                return Err(KbError::Dimension { expected, found: dim });
            }
        }

        let id = entry.cve_id.clone();
        let mut text = serde_json::to_string_pretty(&entry).expect("entry serializes");
        text.push('\n');
        write_atomic(&self.root.join("entries").join(format!("{id}.json")), &text)?;
        // Keep the in-memory copy identical to what a re-open would read.
        let stored: CveEntry = serde_json::from_str(&text).expect("entry round-trips");
        self.entries.insert(id.clone(), stored);
        self.manifest.embedding_dim = Some(dim);
        self.manifest.entries = self.entries.keys().cloned().collect();
        self.write_manifest()?;
        Ok(id)
    }

    /// Ingests every `*.json` document under `path` (or `path` itself), in
    /// file-name order.
    pub fn ingest_path(&mut self, path: &Path, ctx: &IngestContext<'_>) -> Result<Vec<String>, KbError> {
        let files = if path.is_dir() {
            let mut v: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|e| KbError::io(path, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            v.sort();
            v
        } else {
            vec![path.to_path_buf()]
        };
        let mut ids = Vec::new();
        for f in files {
            let text = fs::read_to_string(&f).map_err(|e| KbError::io(&f, e))?;
            let doc: Value = serde_json::from_str(&text).map_err(|e| KbError::schema("$", format!("{}: {e}", f.display())))?;
            ids.push(self.ingest(&doc, ctx)?);
        }
        Ok(ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::{GatewayConfig, ScriptedBackend};
    use serde_json::json;

    fn doc(id: &str) -> Value {
        json!({
            "cve_id": id,
            "cwe_type": "CWE-476",
            "severity": "MEDIUM",
            "description": "looks up a device and dereferences the result",
            "vulnerable_code": "int g(int k) { struct dev *d = find(k); return d->id; }",
            "patched_code": "int g(int k) { struct dev *d = find(k); if (!d) return -1; return d->id; }",
            "symbolic_variables": [{"symbol": "variable_1", "description": "a possibly absent device handle"}],
            "symbolic_functions": [{"symbol": "function_1", "description": "searches a registry by key"}],
            "entry_mapping_variables": {"variable_1": "d"},
            "entry_mapping_functions": {"function_1": "find"}
        })
    }

    fn with_store<T>(f: impl FnOnce(&mut KbStore, &IngestContext<'_>) -> T) -> T {
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::new(Box::new(ScriptedBackend::new(32)), GatewayConfig::default());
        let vocab = Vocabulary::builtin();
        let cats = CweCategories::builtin();
        let ctx = IngestContext { gateway: Some(&gw), vocabulary: &vocab, categories: &cats };
        let mut store = KbStore::open_or_create(dir.path().join("kb")).unwrap();
        f(&mut store, &ctx)
    }

    #[test]
    fn ingest_retrieve_conflict() {
        with_store(|store, ctx| {
            let id = store.ingest(&doc("CVE-2024-11111"), ctx).unwrap();
            let e = store.retrieve(&id).unwrap().clone();
            assert_eq!(e.vulnerable_code, doc("CVE-2024-11111")["vulnerable_code"]);
            assert_eq!(e.emb_description.len(), 32);
            assert!(matches!(store.ingest(&doc("CVE-2024-11111"), ctx), Err(KbError::Conflict(_))));
            assert!(matches!(store.retrieve("CVE-1999-0001"), Err(KbError::NotFound(_))));

            let reopened = KbStore::open(store.root()).unwrap();
            assert_eq!(reopened.retrieve(&id).unwrap(), &e);
            for v in [&e.emb_description, &e.emb_variables, &e.emb_functions] {
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((n - 1.0).abs() < 1e-6);
            }
        });
    }

    #[test]
    fn missing_embeddings_without_provider() {
        let dir = tempfile::tempdir().unwrap();
        let vocab = Vocabulary::builtin();
        let cats = CweCategories::builtin();
        let ctx = IngestContext { gateway: None, vocabulary: &vocab, categories: &cats };
        let mut store = KbStore::open_or_create(dir.path()).unwrap();
        match store.ingest(&doc("CVE-2024-22222"), &ctx) {
            Err(KbError::Schema { field, .. }) => assert_eq!(field, "emb_description"),
            other => panic!("{other:?}"),
        }
        assert!(store.is_empty());
    }

    #[test]
    fn lock_blocks_concurrent_ingest() {
        with_store(|store, ctx| {
            let _held = store.lock().unwrap();
            assert!(matches!(store.ingest(&doc("CVE-2024-33333"), ctx), Err(KbError::Locked(_))));
        });
    }
}
