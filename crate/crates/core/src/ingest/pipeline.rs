use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use super::filters::{filter_numeric_date, filter_place_names, filter_stopword_only, frequency_filter};
use super::merge::{merge_variants, MergeConfig, Variant};
use super::text::normalize;
use super::{CleanCorpus, CorpusItem, IngestConfig, IngestError, PipelineReport, RawItem, StepReport};

/// Word lists resolved from the config paths.
#[derive(Debug, Clone, Default)]
pub struct Lexicons {
    pub stopwords: HashSet<String>,
    pub gazetteer: HashSet<String>,
}

impl Lexicons {
    pub fn load(config: &IngestConfig) -> Result<Self, IngestError> {
        let mut stopwords = HashSet::new();
        for path in config.stopword_paths.values() {
            stopwords.extend(load_word_list(path)?);
        }
        let gazetteer = match &config.gazetteer_path {
            Some(path) => load_word_list(path)?,
            None => HashSet::new(),
        };
        Ok(Self {
            stopwords,
            gazetteer,
        })
    }
}

/// Reads a newline-delimited UTF-8 list, normalizing each entry and skipping blanks.
pub fn load_word_list(path: &Path) -> Result<HashSet<String>, IngestError> {
    let content = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(content
        .lines()
        .map(normalize)
        .filter(|w| !w.is_empty())
        .collect())
}

pub(crate) fn id_width(n: usize) -> usize {
    n.saturating_sub(1).to_string().len().max(6)
}

pub(crate) fn item_id(index: usize, width: usize) -> String {
    format!("d{index:0width$}")
}

fn removal_step(step: u8, name: &str, input: usize, removed: &[RawItem]) -> StepReport {
    StepReport {
        step,
        name: name.into(),
        input_items: input,
        output_items: input - removed.len(),
        removed_items: removed.len(),
        removed_count: removed.iter().map(|r| r.count).sum(),
        merged_items: 0,
    }
}

pub fn run_pipeline(raw: Vec<RawItem>, config: &IngestConfig) -> Result<CleanCorpus, IngestError> {
    config.validate()?;
    let lexicons = Lexicons::load(config)?;
    Ok(run_pipeline_with(raw, &lexicons, config.merge_config(), config.min_count))
}

/// Runs steps 1-5 in order against already-loaded word lists.
pub fn run_pipeline_with(
    raw: Vec<RawItem>,
    lexicons: &Lexicons,
    merge: MergeConfig,
    min_count: u64,
) -> CleanCorpus {
    let mut report = PipelineReport {
        raw_records: raw.len(),
        raw_count: raw.iter().map(|r| r.count).sum(),
        ..Default::default()
    };

    let n = raw.len();
    let (items, removed) = filter_numeric_date(raw);
    report.steps.push(removal_step(1, "numeric_or_date", n, &removed));

    let n = items.len();
    let (items, removed) = filter_stopword_only(items, &lexicons.stopwords);
    report.steps.push(removal_step(2, "stopword_only", n, &removed));

    let n = items.len();
    let (items, removed) = filter_place_names(items, &lexicons.gazetteer);
    report.steps.push(removal_step(3, "place_name", n, &removed));

    // step 4: aggregate raw forms under their normalized text, then merge variants
    let n = items.len();
    let mut by_norm: BTreeMap<String, (u64, BTreeSet<String>)> = BTreeMap::new();
    for item in items {
        let entry = by_norm.entry(normalize(&item.raw_text)).or_default();
        entry.0 += item.count;
        entry.1.insert(item.raw_text);
    }
    let variants: Vec<Variant> = by_norm
        .iter()
        .map(|(text, (count, _))| Variant::new(text.clone(), *count))
        .collect();
    let merge_map = merge_variants(&variants, merge);
    let merged: Vec<CorpusItem> = merge_map
        .groups
        .iter()
        .map(|group| {
            let raw_forms: BTreeSet<String> = group
                .variants
                .iter()
                .flat_map(|v| by_norm[v].1.iter().cloned())
                .collect();
            CorpusItem {
                id: String::new(),
                canonical_text: group.representative.clone(),
                total_count: group.total_count,
                merged_raw_forms: raw_forms.into_iter().collect(),
            }
        })
        .collect();
    report.steps.push(StepReport {
        step: 4,
        name: "merge_variants".into(),
        input_items: n,
        output_items: merged.len(),
        removed_items: 0,
        removed_count: 0,
        merged_items: n - merged.len(),
    });

    let n = merged.len();
    let (mut kept, removed) = frequency_filter(merged, min_count);
    report.steps.push(StepReport {
        step: 5,
        name: "frequency".into(),
        input_items: n,
        output_items: kept.len(),
        removed_items: removed.len(),
        removed_count: removed.iter().map(|r| r.total_count).sum(),
        merged_items: 0,
    });

    kept.sort_by(|a, b| a.canonical_text.cmp(&b.canonical_text));
    let width = id_width(kept.len());
    for (i, item) in kept.iter_mut().enumerate() {
        item.id = item_id(i, width);
    }
    report.final_items = kept.len();
    CleanCorpus {
        items: kept,
        pipeline_report: report,
    }
}
