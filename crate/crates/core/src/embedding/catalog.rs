use std::collections::HashSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::EmbeddingError;

/// Where a model's vectors come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSource {
    /// EMB1 or JSONL file, relative paths resolved against the store root.
    File(PathBuf),
    /// The 3-gram hashing embedder with the given seed.
    BuiltinHash { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub model_id: String,
    pub dim: usize,
    pub source: ModelSource,
    #[serde(default)]
    pub display_label: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelCatalog {
    pub entries: Vec<CatalogEntry>,
}

impl ModelCatalog {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        let mut seen = HashSet::new();
        for entry in &self.entries {
            if !seen.insert(entry.model_id.as_str()) {
                return Err(EmbeddingError::DuplicateId(entry.model_id.clone()));
            }
            if entry.dim < 2 {
                return Err(EmbeddingError::InvalidDim(entry.dim));
            }
        }
        Ok(())
    }

    pub fn get(&self, model_id: &str) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.model_id == model_id)
    }
}
