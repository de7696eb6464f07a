use std::collections::BTreeMap;
use std::sync::Arc;

use taxonomist_core::index::VpTree;
use taxonomist_core::ingest::CleanCorpus;
use taxonomist_core::precompute::{
    load_corpus, load_model_matrix, load_vp_tree, GridManifest, PrecomputeError, ProjectionArtifact, GRID_KEY,
};
use taxonomist_core::session::{Clock, OutputData, Session, SessionError, TaxonomyExport, Workbench};
use taxonomist_core::store::{ArtifactKind, ArtifactStore, ProducedBy, StoreError};
use thiserror::Error;

pub const TAXONOMY_KEY: &str = "taxonomy";

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Precompute(#[from] PrecomputeError),
    #[error("store has no grid; run precompute first")]
    NoGrid,
    #[error("stored state rejected: {0}")]
    Session(#[from] SessionError),
}

impl LoadError {
    pub fn is_integrity(&self) -> bool {
        match self {
            LoadError::Store(e) => e.is_integrity(),
            LoadError::Precompute(PrecomputeError::Store(e)) => e.is_integrity(),
            _ => false,
        }
    }
}

/// Everything the service reads, loaded once at startup, plus the live workbench.
pub struct AppState {
    pub store: ArtifactStore,
    pub corpus: Arc<CleanCorpus>,
    pub grid: GridManifest,
    pub projections: BTreeMap<String, ProjectionArtifact>,
    pub workbench: Workbench,
}

impl AppState {
    /// Verifies every artifact, then builds the workbench and restores any
    /// persisted sessions and taxonomy.
    pub fn load(store: ArtifactStore, clock: Arc<dyn Clock>) -> Result<Self, LoadError> {
        store.verify_all()?;
        if store.entry(ArtifactKind::Grid, GRID_KEY).is_none() {
            return Err(LoadError::NoGrid);
        }
        let corpus = Arc::new(load_corpus(&store)?);
        let grid: GridManifest = store.load_json(ArtifactKind::Grid, GRID_KEY)?;
        let mut projections = BTreeMap::new();
        let mut trees: BTreeMap<String, Arc<VpTree>> = BTreeMap::new();
        for cell in &grid.cells {
            let p: ProjectionArtifact = store.load_json(ArtifactKind::Projection, &cell.output_id)?;
            if !trees.contains_key(&p.model_id) {
                let matrix = Arc::new(load_model_matrix(&store, &p.model_id)?);
                trees.insert(p.model_id.clone(), Arc::new(load_vp_tree(&store, matrix)?));
            }
            projections.insert(p.output_id.clone(), p);
        }
        let outputs = projections
            .values()
            .map(|p| OutputData {
                output_id: p.output_id.clone(),
                model_id: p.model_id.clone(),
                coords: p.coords.clone(),
            })
            .collect();
        let workbench = Workbench::new(corpus.clone(), outputs, trees.into_values().collect(), clock)?;
        if store.entry(ArtifactKind::Taxonomy, TAXONOMY_KEY).is_some() {
            let doc: TaxonomyExport = store.load_json(ArtifactKind::Taxonomy, TAXONOMY_KEY)?;
            workbench.import_taxonomy(&doc)?;
        }
        for entry in store.entries(ArtifactKind::Session) {
            let snapshot: Session = store.load_json(ArtifactKind::Session, &entry.key)?;
            workbench.restore_session(snapshot)?;
        }
        Ok(Self {
            store,
            corpus,
            grid,
            projections,
            workbench,
        })
    }

    pub fn persist_session(&self, session_id: &str) -> Result<(), StoreError> {
        if let Ok(snapshot) = self.workbench.session(session_id) {
            self.store
                .save_json(ArtifactKind::Session, session_id, &snapshot, ProducedBy::new("session"), None)?;
        }
        Ok(())
    }

    pub fn persist_taxonomy(&self) -> Result<(), StoreError> {
        let doc = self.workbench.export_taxonomy();
        self.store
            .save_json(ArtifactKind::Taxonomy, TAXONOMY_KEY, &doc, ProducedBy::new("commit_class"), None)?;
        Ok(())
    }
}
