use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::SessionError;
use crate::ingest::CleanCorpus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRecord {
    pub class_id: String,
    pub label: String,
    pub member_ids: Vec<String>,
    pub source_output_id: String,
    pub committed_at: String,
}

/// Committed classes; each item belongs to at most one.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub classes: Vec<ClassRecord>,
    /// item id -> class id
    pub assignment: BTreeMap<String, String>,
}

/// The exported document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyExport {
    pub classes: Vec<ClassRecord>,
    pub unassigned: Vec<String>,
    pub ignored_at_export: Vec<String>,
}

impl Taxonomy {
    pub(crate) fn next_class_id(&self) -> String {
        format!("c{:04}", self.classes.len() + 1)
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.classes.iter().any(|c| c.label == label)
    }

    pub(crate) fn insert(&mut self, class: ClassRecord) {
        for id in &class.member_ids {
            self.assignment.insert(id.clone(), class.class_id.clone());
        }
        self.classes.push(class);
    }

    /// Rebuilds a taxonomy from exported classes, checking every contract.
    pub fn from_classes(classes: Vec<ClassRecord>, corpus: &CleanCorpus) -> Result<Self, SessionError> {
        let known: HashSet<&str> = corpus.items.iter().map(|i| i.id.as_str()).collect();
        let mut labels = HashSet::new();
        let mut class_ids = HashSet::new();
        let mut taxonomy = Taxonomy::default();
        for class in classes {
            let bad = |m: String| Err(SessionError::InvalidTaxonomy(m));
            if class.label.trim().is_empty() {
                return bad(format!("class {} has an empty label", class.class_id));
            }
            if !labels.insert(class.label.clone()) {
                return bad(format!("duplicate label '{}'", class.label));
            }
            if !class_ids.insert(class.class_id.clone()) {
                return bad(format!("duplicate class id {}", class.class_id));
            }
            if class.member_ids.is_empty() {
                return bad(format!("class {} has no members", class.class_id));
            }
            for id in &class.member_ids {
                if !known.contains(id.as_str()) {
                    return bad(format!("class {} names unknown item {id}", class.class_id));
                }
                if let Some(other) = taxonomy.assignment.get(id) {
                    return bad(format!("item {id} is in both {other} and {}", class.class_id));
                }
            }
            taxonomy.insert(class);
        }
        Ok(taxonomy)
    }

    pub fn export(&self, corpus: &CleanCorpus, ignored: Vec<String>) -> TaxonomyExport {
        TaxonomyExport {
            classes: self.classes.clone(),
            unassigned: corpus
                .items
                .iter()
                .filter(|i| !self.assignment.contains_key(&i.id))
                .map(|i| i.id.clone())
                .collect(),
            ignored_at_export: ignored,
        }
    }
}
