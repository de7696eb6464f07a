//! Raw descriptor ingestion and the five-step cleaning pipeline.
//!
//! 1. drop numeric/date-only items
//! 2. drop stopword-only items
//! 3. drop exact place-name matches
//! 4. merge variants (trim, lowercase, fingerprint and edit-distance merging)
//! 5. drop descriptors whose merged count is below `min_count`

mod filters;
mod merge;
mod parse;
mod pipeline;
pub mod text;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filters::{
    filter_numeric_date, filter_place_names, filter_stopword_only, frequency_filter,
    is_numeric_or_date, is_stopword_only,
};
pub use merge::{merge_variants, MergeConfig, MergeGroup, MergeMap, Variant};
pub use parse::{parse_corpus, parse_csv, parse_jsonl, CorpusFormat};
pub use pipeline::{load_word_list, run_pipeline, run_pipeline_with, Lexicons};
pub use text::{fingerprint_key, levenshtein, normalize};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{}: corpus file contains no records", .0.display())]
    Empty(PathBuf),
    #[error("invalid ingest config: {0}")]
    Config(String),
}

/// One record of the raw descriptor population.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawItem {
    pub raw_text: String,
    pub count: u64,
}

impl RawItem {
    pub fn new(raw_text: impl Into<String>, count: u64) -> Self {
        Self {
            raw_text: raw_text.into(),
            count,
        }
    }
}

/// A canonical descriptor with the raw forms that were merged into it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusItem {
    pub id: String,
    pub canonical_text: String,
    pub total_count: u64,
    pub merged_raw_forms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: u8,
    pub name: String,
    pub input_items: usize,
    pub output_items: usize,
    pub removed_items: usize,
    /// Sum of raw occurrence counts dropped by this step.
    pub removed_count: u64,
    pub merged_items: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub raw_records: usize,
    pub raw_count: u64,
    pub steps: Vec<StepReport>,
    pub final_items: usize,
}

/// The cleaned, deduplicated descriptor set. Items are sorted by canonical
/// text and ids follow that order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanCorpus {
    pub items: Vec<CorpusItem>,
    pub pipeline_report: PipelineReport,
}

impl CleanCorpus {
    /// Builds a corpus directly from canonical texts (count 1 each), bypassing
    /// the cleaning steps. Texts must be distinct.
    pub fn from_texts<S: AsRef<str>>(texts: &[S]) -> Self {
        let mut sorted: Vec<String> = texts.iter().map(|t| t.as_ref().to_string()).collect();
        sorted.sort();
        sorted.dedup();
        let width = pipeline::id_width(sorted.len());
        let items: Vec<CorpusItem> = sorted
            .into_iter()
            .enumerate()
            .map(|(i, t)| CorpusItem {
                id: pipeline::item_id(i, width),
                canonical_text: t.clone(),
                total_count: 1,
                merged_raw_forms: vec![t],
            })
            .collect();
        let n = items.len();
        Self {
            items,
            pipeline_report: PipelineReport {
                raw_records: n,
                raw_count: n as u64,
                steps: Vec::new(),
                final_items: n,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.items.iter().map(|i| i.id.clone()).collect()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.items.iter().map(|i| i.canonical_text.as_str()).collect()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|i| i.id == id)
    }

    /// Stable JSON encoding (struct field order, no map reordering).
    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("corpus serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestConfig {
    /// Stopword file per language code.
    #[serde(default)]
    pub stopword_paths: std::collections::BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub gazetteer_path: Option<PathBuf>,
    pub levenshtein_max_distance: usize,
    pub levenshtein_min_length: usize,
    pub min_count: u64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        let merge = MergeConfig::default();
        Self {
            stopword_paths: Default::default(),
            gazetteer_path: None,
            levenshtein_max_distance: merge.max_distance,
            levenshtein_min_length: merge.min_length,
            min_count: 4,
        }
    }
}

impl IngestConfig {
    pub fn merge_config(&self) -> MergeConfig {
        MergeConfig {
            max_distance: self.levenshtein_max_distance,
            min_length: self.levenshtein_min_length,
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.min_count < 1 {
            return Err(IngestError::Config("min_count must be >= 1".into()));
        }
        Ok(())
    }
}
