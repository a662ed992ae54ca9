//! Persistence and keyed lookup of offline templates.
//!
//! A directory store keeps one pretty-printed JSON document per key, named
//! by the SHA-256 of the key, plus `index.tsv` listing digest, normalized
//! query and fingerprints for humans. Writes go to a temporary file in the
//! same directory and are renamed into place.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::schema::{schema_fingerprint, TableSchema};
use crate::sqlexec::SqlQuery;
use crate::template::Jinja2Template;
use crate::workflow::{normalize_query, OfflineTemplate, Provenance};

pub const FORMAT_VERSION: u32 = 1;
const INDEX_FILE: &str = "index.tsv";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt template document for key {key}: {reason}")]
    Corruption { key: String, reason: String },
    #[error("unsupported template document format_version {0} (expected {FORMAT_VERSION})")]
    UnsupportedVersion(u64),
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StoreKey {
    pub normalized_query: String,
    pub fingerprints: Vec<String>,
}

impl StoreKey {
    pub fn new(query: &str, fingerprints: Vec<String>) -> Self {
        Self {
            normalized_query: normalize_query(query),
            fingerprints,
        }
    }

    pub fn for_schemas(query: &str, schemas: &[&TableSchema]) -> Self {
        Self::new(query, schemas.iter().map(|s| schema_fingerprint(s)).collect())
    }

    pub fn of_template(template: &OfflineTemplate) -> Self {
        Self::new(&template.user_query, template.schema_fingerprints.clone())
    }

    /// Hex SHA-256 over the normalized query and fingerprints.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"facts-store-v1\n");
        h.update(self.normalized_query.as_bytes());
        for fp in &self.fingerprints {
            h.update(b"\n");
            h.update(fp.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// On-disk form of an [`OfflineTemplate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateDocument {
    pub format_version: u32,
    pub user_query: String,
    pub normalized_query: String,
    pub schema_fingerprints: Vec<String>,
    pub sql_queries: Vec<String>,
    pub jinja2_template: String,
    pub provenance: Provenance,
}

impl TemplateDocument {
    pub fn from_template(t: &OfflineTemplate) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            user_query: t.user_query.clone(),
            normalized_query: normalize_query(&t.user_query),
            schema_fingerprints: t.schema_fingerprints.clone(),
            sql_queries: t.sql_queries.iter().map(|q| q.text().to_string()).collect(),
            jinja2_template: t.jinja2_template.source().to_string(),
            provenance: t.provenance.clone(),
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }

    /// Parses and version-checks a document. `key` only labels errors.
    pub fn from_text(text: &str, key: &str) -> Result<Self, StoreError> {
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| StoreError::Corruption {
                key: key.to_string(),
                reason: e.to_string(),
            })?;
        match raw.get("format_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => return Err(StoreError::UnsupportedVersion(v)),
            None => {
                return Err(StoreError::Corruption {
                    key: key.to_string(),
                    reason: "missing format_version".into(),
                })
            }
        }
        serde_json::from_value(raw).map_err(|e| StoreError::Corruption {
            key: key.to_string(),
            reason: e.to_string(),
        })
    }

    pub fn into_template(self, key: &str) -> Result<OfflineTemplate, StoreError> {
        let corrupt = |reason: String| StoreError::Corruption {
            key: key.to_string(),
            reason,
        };
        if self.sql_queries.is_empty() {
            return Err(corrupt("no SQL queries".into()));
        }
        if self.normalized_query != normalize_query(&self.user_query) {
            return Err(corrupt("normalized_query does not match user_query".into()));
        }
        let jinja2_template = Jinja2Template::parse(&self.jinja2_template)
            .map_err(|e| corrupt(format!("template does not parse: {e}")))?;
        Ok(OfflineTemplate {
            user_query: self.user_query,
            schema_fingerprints: self.schema_fingerprints,
            sql_queries: self.sql_queries.into_iter().map(SqlQuery::new).collect(),
            jinja2_template,
            provenance: self.provenance,
        })
    }
}

/// Serializes a template the way stores write it.
pub fn serialize_template(t: &OfflineTemplate) -> String {
    TemplateDocument::from_template(t).to_text()
}

pub fn deserialize_template(text: &str) -> Result<OfflineTemplate, StoreError> {
    TemplateDocument::from_text(text, "<inline>")?.into_template("<inline>")
}

/// Reads a template document from any path.
pub fn load_template_file(path: &Path) -> Result<OfflineTemplate, StoreError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let label = path.display().to_string();
    TemplateDocument::from_text(&text, &label)?.into_template(&label)
}

pub trait TemplateStore: Send + Sync {
    /// Writes `template` under its key; an existing entry is replaced.
    fn save(&self, template: &OfflineTemplate) -> Result<StoreKey, StoreError>;

    fn lookup_key(&self, key: &StoreKey) -> Result<Option<OfflineTemplate>, StoreError>;

    fn lookup(
        &self,
        query: &str,
        schemas: &[&TableSchema],
    ) -> Result<Option<OfflineTemplate>, StoreError> {
        self.lookup_key(&StoreKey::for_schemas(query, schemas))
    }
}

/// Documents kept in memory, still round-tripped through their text form.
#[derive(Debug, Default)]
pub struct MemoryStore {
    docs: Mutex<HashMap<String, String>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.docs.lock().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl TemplateStore for MemoryStore {
    fn save(&self, template: &OfflineTemplate) -> Result<StoreKey, StoreError> {
        let key = StoreKey::of_template(template);
        self.docs
            .lock()
            .expect("store lock")
            .insert(key.digest(), serialize_template(template));
        Ok(key)
    }

    fn lookup_key(&self, key: &StoreKey) -> Result<Option<OfflineTemplate>, StoreError> {
        let digest = key.digest();
        let text = self.docs.lock().expect("store lock").get(&digest).cloned();
        text.map(|t| TemplateDocument::from_text(&t, &digest)?.into_template(&digest))
            .transpose()
    }
}

#[derive(Debug, Clone)]
pub struct DirStore {
    root: PathBuf,
}

impl DirStore {
    /// Opens `root`, creating it if needed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &StoreKey) -> PathBuf {
        self.root.join(format!("{}.json", key.digest()))
    }

    fn write_atomic(&self, target: &Path, contents: &str) -> Result<(), StoreError> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.root).map_err(io_err(&self.root))?;
        tmp.write_all(contents.as_bytes())
            .and_then(|_| tmp.as_file().sync_all())
            .map_err(io_err(tmp.path()))?;
        tmp.persist(target).map_err(|e| StoreError::Io {
            path: target.to_path_buf(),
            source: e.error,
        })?;
        Ok(())
    }

    fn update_index(&self, key: &StoreKey) -> Result<(), StoreError> {
        let path = self.root.join(INDEX_FILE);
        let existing = match fs::read_to_string(&path) {
            Ok(s) => s,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let digest = key.digest();
        let flat_query = key.normalized_query.replace(['\t', '\n'], " ");
        let mut lines: Vec<String> = existing
            .lines()
            .filter(|l| !l.is_empty() && l.split('\t').next() != Some(digest.as_str()))
            .map(str::to_string)
            .collect();
        lines.push(format!(
            "{digest}\t{flat_query}\t{}",
            key.fingerprints.join(",")
        ));
        lines.sort();
        let mut text = lines.join("\n");
        text.push('\n');
        self.write_atomic(&path, &text)
    }
}

impl TemplateStore for DirStore {
    fn save(&self, template: &OfflineTemplate) -> Result<StoreKey, StoreError> {
        let key = StoreKey::of_template(template);
        self.write_atomic(&self.path_for(&key), &serialize_template(template))?;
        self.update_index(&key)?;
        Ok(key)
    }

    fn lookup_key(&self, key: &StoreKey) -> Result<Option<OfflineTemplate>, StoreError> {
        let path = self.path_for(key);
        let text = match fs::read_to_string(&path) {
            Ok(s) => s,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let digest = key.digest();
        TemplateDocument::from_text(&text, &digest)?
            .into_template(&digest)
            .map(Some)
    }
}
