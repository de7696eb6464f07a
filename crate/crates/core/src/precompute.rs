//! Batch execution of the precompute grid against an artifact store.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{dbscan, ClusterLabeling, ClusterParams};
use crate::digest::sha256_hex;
use crate::embedding::{
    decode_emb1, encode_emb1, hash_embed, load_embeddings, normalize_rows, CatalogEntry,
    EmbeddingError, EmbeddingMatrix, ModelCatalog, ModelSource,
};
use crate::index::{IndexError, VpTree, VpTreeCache};
use crate::ingest::CleanCorpus;
use crate::reduce::{expand_grid, reduce, Diagnostics, GridCell, GridConfig, ReduceError};
use crate::store::{ArtifactKind, ArtifactStore, ProducedBy, StoreError};

pub const CORPUS_KEY: &str = "corpus";
pub const GRID_KEY: &str = "grid";

#[derive(Debug, Error)]
pub enum PrecomputeError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("model {model_id}: {source}")]
    Embedding {
        model_id: String,
        #[source]
        source: EmbeddingError,
    },
    #[error("model {model_id}: {source}")]
    Index {
        model_id: String,
        #[source]
        source: IndexError,
    },
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error("config: {0}")]
    Config(String),
}

/// The grid config file: a [`GridConfig`] plus how to obtain each model's vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecomputeConfig {
    #[serde(flatten)]
    pub grid: GridConfig,
    #[serde(default)]
    pub catalog: Vec<CatalogEntry>,
}

impl PrecomputeConfig {
    pub fn config_hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    pub fn validate(&self) -> Result<(), PrecomputeError> {
        let catalog = ModelCatalog {
            entries: self.catalog.clone(),
        };
        catalog.validate().map_err(|source| PrecomputeError::Embedding {
            model_id: "catalog".into(),
            source,
        })?;
        for model in &self.grid.model_ids {
            if catalog.get(model).is_none() {
                return Err(PrecomputeError::Config(format!("model {model} has no catalog entry")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PrecomputeOptions {
    pub workers: usize,
    pub seed: u64,
}

/// One stored grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionArtifact {
    pub output_id: String,
    pub model_id: String,
    pub method: String,
    pub params: serde_json::Value,
    pub cluster_params: ClusterParams,
    pub coords: Vec<[f64; 2]>,
    pub diagnostics: Diagnostics,
    pub clusters: ClusterLabeling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub output_id: String,
    pub error: String,
}

/// Cell descriptors of a run, in grid order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridManifest {
    pub config_hash: String,
    pub cells: Vec<GridCell>,
    #[serde(default)]
    pub failed: Vec<FailedCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Computed,
    Skipped,
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct PrecomputeReport {
    pub cells: Vec<(GridCell, CellOutcome)>,
    pub vp_trees_built: usize,
    pub vp_trees_reused: usize,
}

impl PrecomputeReport {
    pub fn count(&self, pred: impl Fn(&CellOutcome) -> bool) -> usize {
        self.cells.iter().filter(|(_, o)| pred(o)).count()
    }

    pub fn failed(&self) -> usize {
        self.count(|o| matches!(o, CellOutcome::Failed(_)))
    }
}

pub fn load_corpus(store: &ArtifactStore) -> Result<CleanCorpus, StoreError> {
    store.load_json(ArtifactKind::Corpus, CORPUS_KEY)
}

/// The stored (EMB1, unit-normalized) matrix for a model.
pub fn load_model_matrix(store: &ArtifactStore, model_id: &str) -> Result<EmbeddingMatrix, PrecomputeError> {
    let bytes = store.load_key(ArtifactKind::Embeddings, model_id)?;
    decode_emb1(model_id, &bytes).map_err(|source| PrecomputeError::Embedding {
        model_id: model_id.into(),
        source,
    })
}

pub fn load_vp_tree(store: &ArtifactStore, matrix: Arc<EmbeddingMatrix>) -> Result<VpTree, PrecomputeError> {
    let model_id = matrix.model_id().to_string();
    let cache: VpTreeCache = store.load_json(ArtifactKind::VpTree, &model_id)?;
    VpTree::from_cache(cache, matrix).map_err(|source| PrecomputeError::Index { model_id, source })
}

/// Source vectors, normalized, then passed through the EMB1 encoding so the
/// in-memory matrix equals what later loads from the store.
fn materialize(
    store: &ArtifactStore,
    corpus: &CleanCorpus,
    entry: &CatalogEntry,
) -> Result<EmbeddingMatrix, EmbeddingError> {
    let raw = match &entry.source {
        ModelSource::File(path) => load_embeddings(&entry.model_id, &store.root().join(path), corpus)?,
        ModelSource::BuiltinHash { seed } => hash_embed(corpus, &entry.model_id, entry.dim, *seed)?,
    };
    if raw.dim() != entry.dim {
        return Err(EmbeddingError::DimMismatch {
            left: entry.dim,
            right: raw.dim(),
        });
    }
    let normalized = normalize_rows(raw)?;
    decode_emb1(&entry.model_id, &encode_emb1(&normalized))
}

fn cell_input_hash(cell: &GridCell, matrix_hash: &str, corpus_hash: &str) -> String {
    let key = serde_json::json!({ "cell": cell, "matrix": matrix_hash, "corpus": corpus_hash });
    sha256_hex(key.to_string().as_bytes())
}

fn compute_cell(cell: &GridCell, matrix: &EmbeddingMatrix) -> Result<ProjectionArtifact, String> {
    let projection = reduce(matrix, &cell.spec).map_err(|e| e.to_string())?;
    let clusters = dbscan(&projection.coords, &cell.cluster_params).map_err(|e| e.to_string())?;
    Ok(ProjectionArtifact {
        output_id: cell.output_id.clone(),
        model_id: cell.model_id.clone(),
        method: cell.spec.method().into(),
        params: cell.spec.params_json(),
        cluster_params: cell.cluster_params,
        coords: projection.coords,
        diagnostics: projection.diagnostics,
        clusters,
    })
}

/// Computes every grid cell not already stored with a matching input hash.
/// Cell failures are recorded and do not stop the run.
pub fn precompute(
    store: &ArtifactStore,
    config: &PrecomputeConfig,
    options: &PrecomputeOptions,
    progress: &(dyn Fn(&GridCell, &CellOutcome) + Sync),
) -> Result<PrecomputeReport, PrecomputeError> {
    config.validate()?;
    let cells = expand_grid(&config.grid)?;
    let corpus_entry = store
        .entry(ArtifactKind::Corpus, CORPUS_KEY)
        .ok_or_else(|| PrecomputeError::Config("no clean corpus in the store; run ingest first".into()))?;
    let corpus = load_corpus(store)?;
    let catalog = ModelCatalog {
        entries: config.catalog.clone(),
    };

    let mut matrices = std::collections::HashMap::new();
    let (mut built, mut reused) = (0, 0);
    for model_id in &config.grid.model_ids {
        let entry = catalog.get(model_id).expect("validated");
        let matrix = materialize(store, &corpus, entry).map_err(|source| PrecomputeError::Embedding {
            model_id: model_id.clone(),
            source,
        })?;
        store.save(
            ArtifactKind::Embeddings,
            model_id,
            &encode_emb1(&matrix),
            ProducedBy::new("embed"),
            None,
        )?;
        let matrix = Arc::new(matrix);
        let tree_input = sha256_hex(format!("{}:{}", matrix.content_hash(), options.seed).as_bytes());
        let cached = store
            .entry(ArtifactKind::VpTree, model_id)
            .filter(|e| e.input_hash.as_deref() == Some(tree_input.as_str()))
            .and_then(|_| load_vp_tree(store, matrix.clone()).ok());
        if cached.is_some() {
            reused += 1;
        } else {
            let tree = VpTree::build(matrix.clone(), options.seed).map_err(|source| PrecomputeError::Index {
                model_id: model_id.clone(),
                source,
            })?;
            store.save_json(
                ArtifactKind::VpTree,
                model_id,
                &tree.to_cache(),
                ProducedBy::new("build_vp_tree"),
                Some(tree_input),
            )?;
            built += 1;
        }
        matrices.insert(model_id.clone(), matrix);
    }

    let run_cell = |cell: &GridCell| -> CellOutcome {
        let matrix = &matrices[&cell.model_id];
        let input_hash = cell_input_hash(cell, &matrix.content_hash(), &corpus_entry.content_hash);
        let done = store
            .entry(ArtifactKind::Projection, &cell.output_id)
            .filter(|e| e.input_hash.as_deref() == Some(input_hash.as_str()))
            .is_some_and(|e| store.load(&e).is_ok());
        let outcome = if done {
            CellOutcome::Skipped
        } else {
            match compute_cell(cell, matrix).and_then(|artifact| {
                store
                    .save_json(
                        ArtifactKind::Projection,
                        &cell.output_id,
                        &artifact,
                        ProducedBy::new("grid_cell"),
                        Some(input_hash),
                    )
                    .map_err(|e| e.to_string())
            }) {
                Ok(_) => CellOutcome::Computed,
                Err(e) => CellOutcome::Failed(e),
            }
        };
        progress(cell, &outcome);
        outcome
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.max(1))
        .build()
        .map_err(|e| PrecomputeError::Config(format!("worker pool: {e}")))?;
    let outcomes: Vec<CellOutcome> = pool.install(|| cells.par_iter().map(run_cell).collect());

    let report = PrecomputeReport {
        cells: cells.into_iter().zip(outcomes).collect(),
        vp_trees_built: built,
        vp_trees_reused: reused,
    };
    let manifest = GridManifest {
        config_hash: config.config_hash(),
        cells: report
            .cells
            .iter()
            .filter(|(_, o)| !matches!(o, CellOutcome::Failed(_)))
            .map(|(c, _)| c.clone())
            .collect(),
        failed: report
            .cells
            .iter()
            .filter_map(|(c, o)| match o {
                CellOutcome::Failed(e) => Some(FailedCell {
                    output_id: c.output_id.clone(),
                    error: e.clone(),
                }),
                _ => None,
            })
            .collect(),
    };
    store.save_json(ArtifactKind::Grid, GRID_KEY, &manifest, ProducedBy::new("precompute"), None)?;
    Ok(report)
}
