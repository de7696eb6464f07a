//! A small store fixture: 36 descriptors and a 2×2×2 grid over two builtin hash models.

use taxonomist_core::cluster::{ClusterParams, Eps};
use taxonomist_core::embedding::{CatalogEntry, ModelSource};
use taxonomist_core::ingest::CleanCorpus;
use taxonomist_core::precompute::{precompute, CellOutcome, PrecomputeConfig, PrecomputeOptions, CORPUS_KEY};
use taxonomist_core::reduce::{GridConfig, ReductionSpec, TsneParams};
use taxonomist_core::store::{ArtifactKind, ArtifactStore, ProducedBy};

pub const WORDS: &[&str] = &[
    "abfall", "arbeit", "bahn", "bau", "bildung", "boden", "bus", "daten", "energie", "fahrrad",
    "finanzen", "forst", "gesundheit", "haushalt", "hafen", "jugend", "kultur", "klima", "luft",
    "mobilitaet", "parken", "radweg", "schule", "soziales", "sport", "strasse", "strom", "umwelt",
    "verkehr", "wahl", "wasser", "wetter", "wirtschaft", "wohnen", "zug", "zoll",
];

pub fn demo_config() -> PrecomputeConfig {
    PrecomputeConfig {
        grid: GridConfig {
            model_ids: vec!["hash-a".into(), "hash-b".into()],
            specs: vec![
                ReductionSpec::Tsne(TsneParams {
                    perplexity: 5.0,
                    iterations: 300,
                    exaggeration_iters: 100,
                    seed: 1,
                    ..Default::default()
                }),
                ReductionSpec::Pca,
            ],
            cluster_params: vec![
                ClusterParams::default(),
                ClusterParams {
                    eps: Eps::Value(0.5),
                    min_pts: 3,
                },
            ],
        },
        catalog: vec![
            CatalogEntry {
                model_id: "hash-a".into(),
                dim: 16,
                source: ModelSource::BuiltinHash { seed: 1 },
                display_label: "A".into(),
            },
            CatalogEntry {
                model_id: "hash-b".into(),
                dim: 32,
                source: ModelSource::BuiltinHash { seed: 2 },
                display_label: "B".into(),
            },
        ],
    }
}

pub fn store_with_corpus(dir: &std::path::Path, words: &[&str]) -> ArtifactStore {
    let store = ArtifactStore::open(dir).unwrap();
    let corpus = CleanCorpus::from_texts(words);
    store
        .save(ArtifactKind::Corpus, CORPUS_KEY, &corpus.to_json(), ProducedBy::new("ingest"), None)
        .unwrap();
    store
}

pub fn run(store: &ArtifactStore, workers: usize) -> Vec<CellOutcome> {
    let opts = PrecomputeOptions { workers, seed: 42 };
    precompute(store, &demo_config(), &opts, &|_, _| {})
        .unwrap()
        .cells
        .into_iter()
        .map(|(_, o)| o)
        .collect()
}

pub fn artifact_hashes(store: &ArtifactStore) -> Vec<(ArtifactKind, String, String)> {
    store
        .manifest()
        .entries
        .into_iter()
        .map(|e| (e.kind, e.key, e.content_hash))
        .collect()
}
