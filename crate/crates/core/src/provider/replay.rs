//! Content-addressed replay archives.
//!
//! An archive is a directory of `<digest>.json` files. Each file holds the
//! request and the sequence of responses observed for it; the n-th identical
//! request in a session receives the n-th response, and requests beyond the
//! recorded sequence receive the last one.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{embed_digest, Backend, ChatRequest, ChatResponse, EmbedResponse, ProviderError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    Chat,
    Embed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub model: String,
    pub input: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub schema: u32,
    pub digest: String,
    pub kind: EntryKind,
    pub request: serde_json::Value,
    pub responses: Vec<serde_json::Value>,
}

#[derive(Debug, Clone)]
pub struct ReplayArchive {
    root: PathBuf,
}

impl ReplayArchive {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, ProviderError> {
        let root = root.into();
        if !root.is_dir() {
            return Err(ProviderError::Archive(format!("{} is not a directory", root.display())));
        }
        Ok(ReplayArchive { root })
    }

    pub fn create(root: impl Into<PathBuf>) -> Result<Self, ProviderError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| ProviderError::Archive(format!("{}: {e}", root.display())))?;
        Ok(ReplayArchive { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, digest: &str) -> PathBuf {
        self.root.join(format!("{digest}.json"))
    }

    pub fn load(&self, digest: &str) -> Result<Option<ArchiveEntry>, ProviderError> {
        let path = self.path(digest);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(ProviderError::Archive(format!("{}: {e}", path.display()))),
        };
        let entry: ArchiveEntry =
            serde_json::from_str(&text).map_err(|e| ProviderError::Archive(format!("{}: {e}", path.display())))?;
        if entry.schema != 1 || entry.digest != digest {
            return Err(ProviderError::Archive(format!("{}: digest or schema mismatch", path.display())));
        }
        if entry.responses.is_empty() {
            return Err(ProviderError::Archive(format!("{}: no responses", path.display())));
        }
        Ok(Some(entry))
    }

    pub fn store(&self, entry: &ArchiveEntry) -> Result<(), ProviderError> {
        let path = self.path(&entry.digest);
        let tmp = path.with_extension("json.tmp");
        let mut text = serde_json::to_string_pretty(entry).expect("archive entry serializes");
        text.push('\n');
        fs::write(&tmp, text)
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|e| ProviderError::Archive(format!("{}: {e}", path.display())))
    }

    /// Every digest in the archive, sorted.
    pub fn digests(&self) -> Result<Vec<String>, ProviderError> {
        let mut out = Vec::new();
        let dir = fs::read_dir(&self.root).map_err(|e| ProviderError::Archive(e.to_string()))?;
        for ent in dir {
            let name = ent.map_err(|e| ProviderError::Archive(e.to_string()))?.file_name();
            if let Some(d) = name.to_str().and_then(|n| n.strip_suffix(".json")) {
                out.push(d.to_string());
            }
        }
        out.sort();
        Ok(out)
    }
}

/// Serves recorded responses; never touches the network.
pub struct ReplayBackend {
    archive: ReplayArchive,
    seen: Mutex<HashMap<String, usize>>,
}

impl ReplayBackend {
    pub fn new(archive: ReplayArchive) -> Self {
        ReplayBackend { archive, seen: Mutex::new(HashMap::new()) }
    }

    fn next(&self, digest: &str) -> Result<serde_json::Value, ProviderError> {
        let entry = self.archive.load(digest)?.ok_or_else(|| ProviderError::ReplayMiss(digest.to_string()))?;
        let mut seen = self.seen.lock().expect("replay lock");
        let n = seen.entry(digest.to_string()).or_insert(0);
        let idx = (*n).min(entry.responses.len() - 1);
        *n += 1;
        Ok(entry.responses[idx].clone())
    }
}

impl Backend for ReplayBackend {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let value = self.next(&req.digest())?;
        serde_json::from_value(value).map_err(|e| ProviderError::Archive(e.to_string()))
    }

    fn embed(&self, model: &str, input: &str) -> Result<EmbedResponse, ProviderError> {
        let value = self.next(&embed_digest(model, input))?;
        serde_json::from_value(value).map_err(|e| ProviderError::Archive(e.to_string()))
    }
}

/// Forwards to an inner backend and writes every exchange to an archive.
pub struct RecordingBackend {
    inner: Box<dyn Backend>,
    archive: ReplayArchive,
    touched: Mutex<HashSet<String>>,
}

impl RecordingBackend {
    pub fn new(inner: Box<dyn Backend>, archive: ReplayArchive) -> Self {
        RecordingBackend { inner, archive, touched: Mutex::new(HashSet::new()) }
    }

    fn record(&self, digest: String, kind: EntryKind, request: serde_json::Value, response: serde_json::Value) -> Result<(), ProviderError> {
        // The lock also serializes read-modify-write of a shared entry.
        let mut touched = self.touched.lock().expect("recording lock");
        let mut entry = match self.archive.load(&digest) {
            Ok(Some(e)) if touched.contains(&digest) => e,
            _ => ArchiveEntry { schema: 1, digest: digest.clone(), kind, request, responses: vec![] },
        };
        entry.responses.push(response);
        self.archive.store(&entry)?;
        touched.insert(digest);
        Ok(())
    }
}

impl Backend for RecordingBackend {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let resp = self.inner.chat(req)?;
        self.record(
            req.digest(),
            EntryKind::Chat,
            serde_json::to_value(req).expect("request serializes"),
            serde_json::to_value(&resp).expect("response serializes"),
        )?;
        Ok(resp)
    }

    fn embed(&self, model: &str, input: &str) -> Result<EmbedResponse, ProviderError> {
        let resp = self.inner.embed(model, input)?;
        let request = EmbedRequest { model: model.to_string(), input: input.to_string() };
        self.record(
            embed_digest(model, input),
            EntryKind::Embed,
            serde_json::to_value(&request).expect("request serializes"),
            serde_json::to_value(&resp).expect("response serializes"),
        )?;
        Ok(resp)
    }
}
