//! Content-addressed flat-file artifact store.
//!
//! Layout: `manifest.json` at the root, payloads at `{kind}/{sha256}.{ext}`.
//! Every write goes to a temporary file in the target directory and is
//! renamed into place; the manifest is only updated after the rename.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use parking_lot::Mutex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_hex;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("integrity check failed for {kind}/{key} at {}: expected {expected}, found {actual}", path.display())]
    Integrity {
        kind: ArtifactKind,
        key: String,
        path: PathBuf,
        expected: String,
        actual: String,
    },
    #[error("no {kind} artifact with key '{key}'")]
    Missing { kind: ArtifactKind, key: String },
    #[error("{kind}/{key}: {message}")]
    Decode {
        kind: ArtifactKind,
        key: String,
        message: String,
    },
    #[error("manifest {}: {message}", path.display())]
    Manifest { path: PathBuf, message: String },
}

impl StoreError {
    pub fn is_integrity(&self) -> bool {
        matches!(self, StoreError::Integrity { .. } | StoreError::Manifest { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Corpus,
    Embeddings,
    Projection,
    VpTree,
    Grid,
    Session,
    Taxonomy,
}

impl ArtifactKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ArtifactKind::Corpus => "corpus",
            ArtifactKind::Embeddings => "embeddings",
            ArtifactKind::Projection => "projection",
            ArtifactKind::VpTree => "vp_tree",
            ArtifactKind::Grid => "grid",
            ArtifactKind::Session => "session",
            ArtifactKind::Taxonomy => "taxonomy",
        }
    }

    fn extension(self) -> &'static str {
        match self {
            ArtifactKind::Embeddings => "emb1",
            _ => "json",
        }
    }
}

impl std::fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProducedBy {
    pub operation: String,
    pub version: String,
}

impl ProducedBy {
    pub fn new(operation: &str) -> Self {
        Self {
            operation: operation.into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub kind: ArtifactKind,
    pub key: String,
    /// Relative to the store root, `/`-separated.
    pub path: String,
    pub content_hash: String,
    pub produced_by: ProducedBy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    /// Resolved configuration of the latest run of each command.
    #[serde(default)]
    pub runs: BTreeMap<String, serde_json::Value>,
    pub entries: Vec<ManifestEntry>,
}

impl Default for Manifest {
    fn default() -> Self {
        Self {
            version: MANIFEST_VERSION,
            config_hash: None,
            runs: BTreeMap::new(),
            entries: Vec::new(),
        }
    }
}

impl Manifest {
    pub fn get(&self, kind: ArtifactKind, key: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.kind == kind && e.key == key)
    }
}

/// Where an injected write failure strikes.
#[cfg(test)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum FailPoint {
    BeforeRename,
}

pub struct ArtifactStore {
    root: PathBuf,
    manifest: Mutex<Manifest>,
    #[cfg(test)]
    fail_point: Mutex<Option<FailPoint>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl ArtifactStore {
    /// Opens (creating if needed) the store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        let path = root.join(MANIFEST_FILE);
        let manifest = if path.exists() {
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            let manifest: Manifest = serde_json::from_slice(&bytes).map_err(|e| StoreError::Manifest {
                path: path.clone(),
                message: e.to_string(),
            })?;
            if manifest.version != MANIFEST_VERSION {
                return Err(StoreError::Manifest {
                    path,
                    message: format!("unsupported version {}", manifest.version),
                });
            }
            manifest
        } else {
            Manifest::default()
        };
        Ok(Self {
            root,
            manifest: Mutex::new(manifest),
            #[cfg(test)]
            fail_point: Mutex::new(None),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> Manifest {
        self.manifest.lock().clone()
    }

    pub fn entry(&self, kind: ArtifactKind, key: &str) -> Option<ManifestEntry> {
        self.manifest.lock().get(kind, key).cloned()
    }

    pub fn entries(&self, kind: ArtifactKind) -> Vec<ManifestEntry> {
        self.manifest
            .lock()
            .entries
            .iter()
            .filter(|e| e.kind == kind)
            .cloned()
            .collect()
    }

    #[cfg(test)]
    pub(crate) fn inject_failure(&self, point: Option<FailPoint>) {
        *self.fail_point.lock() = point;
    }

    fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
        let dir = path.parent().expect("artifact paths have a parent");
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let tmp = dir.join(format!(".tmp-{}", uuid::Uuid::new_v4()));
        let mut file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        file.write_all(bytes).map_err(io_err(&tmp))?;
        file.sync_all().map_err(io_err(&tmp))?;
        drop(file);
        #[cfg(test)]
        if *self.fail_point.lock() == Some(FailPoint::BeforeRename) {
            return Err(StoreError::Io {
                path: tmp,
                source: std::io::Error::other("injected failure before rename"),
            });
        }
        fs::rename(&tmp, path).map_err(|e| {
            let _ = fs::remove_file(&tmp);
            io_err(path)(e)
        })
    }

    fn persist_manifest(&self, manifest: &Manifest) -> Result<(), StoreError> {
        let bytes = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
        self.write_atomic(&self.root.join(MANIFEST_FILE), &bytes)
    }

    /// Writes `bytes` and records (or replaces) the `(kind, key)` entry.
    pub fn save(
        &self,
        kind: ArtifactKind,
        key: &str,
        bytes: &[u8],
        produced_by: ProducedBy,
        input_hash: Option<String>,
    ) -> Result<ManifestEntry, StoreError> {
        let content_hash = sha256_hex(bytes);
        let rel = format!("{}/{}.{}", kind.as_str(), content_hash, kind.extension());
        let path = self.root.join(&rel);
        self.write_atomic(&path, bytes)?;
        let entry = ManifestEntry {
            kind,
            key: key.to_string(),
            path: rel,
            content_hash,
            produced_by,
            input_hash,
        };
        let mut manifest = self.manifest.lock();
        let mut next = manifest.clone();
        next.entries.retain(|e| !(e.kind == kind && e.key == key));
        next.entries.push(entry.clone());
        next.entries.sort_by(|a, b| (a.kind, &a.key).cmp(&(b.kind, &b.key)));
        self.persist_manifest(&next)?;
        *manifest = next;
        Ok(entry)
    }

    pub fn save_json<T: Serialize>(
        &self,
        kind: ArtifactKind,
        key: &str,
        value: &T,
        produced_by: ProducedBy,
        input_hash: Option<String>,
    ) -> Result<ManifestEntry, StoreError> {
        let bytes = serde_json::to_vec_pretty(value).map_err(|e| StoreError::Decode {
            kind,
            key: key.into(),
            message: e.to_string(),
        })?;
        self.save(kind, key, &bytes, produced_by, input_hash)
    }

    /// Reads the entry's file and verifies its hash.
    pub fn load(&self, entry: &ManifestEntry) -> Result<Vec<u8>, StoreError> {
        let path = self.root.join(&entry.path);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let actual = sha256_hex(&bytes);
        if actual != entry.content_hash {
            return Err(StoreError::Integrity {
                kind: entry.kind,
                key: entry.key.clone(),
                path,
                expected: entry.content_hash.clone(),
                actual,
            });
        }
        Ok(bytes)
    }

    pub fn load_key(&self, kind: ArtifactKind, key: &str) -> Result<Vec<u8>, StoreError> {
        let entry = self.entry(kind, key).ok_or_else(|| StoreError::Missing {
            kind,
            key: key.into(),
        })?;
        self.load(&entry)
    }

    pub fn load_json<T: DeserializeOwned>(&self, kind: ArtifactKind, key: &str) -> Result<T, StoreError> {
        let bytes = self.load_key(kind, key)?;
        serde_json::from_slice(&bytes).map_err(|e| StoreError::Decode {
            kind,
            key: key.into(),
            message: e.to_string(),
        })
    }

    /// Re-hashes every referenced file.
    pub fn verify_all(&self) -> Result<(), StoreError> {
        for entry in self.manifest().entries {
            self.load(&entry)?;
        }
        Ok(())
    }

    pub fn record_run(
        &self,
        command: &str,
        config: serde_json::Value,
        config_hash: Option<String>,
    ) -> Result<(), StoreError> {
        let mut manifest = self.manifest.lock();
        let mut next = manifest.clone();
        next.runs.insert(command.into(), config);
        if config_hash.is_some() {
            next.config_hash = config_hash;
        }
        self.persist_manifest(&next)?;
        *manifest = next;
        Ok(())
    }

    pub fn remove_entry(&self, kind: ArtifactKind, key: &str) -> Result<(), StoreError> {
        let mut manifest = self.manifest.lock();
        let mut next = manifest.clone();
        next.entries.retain(|e| !(e.kind == kind && e.key == key));
        self.persist_manifest(&next)?;
        *manifest = next;
        Ok(())
    }
}
