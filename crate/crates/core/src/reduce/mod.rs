//! 2-D projections (t-SNE, PCA, classical MDS) and the precompute grid.

mod grid;
pub mod linalg;
mod mds;
mod pca;
mod tsne;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grid::{expand_grid, output_id, GridCell, GridConfig};
pub use mds::{classical_mds, mds_2d};
pub use pca::pca_2d;
pub use tsne::{conditional_probabilities, joint_probabilities, tsne_2d, ConditionalP, TsneParams};

#[derive(Debug, Error, PartialEq)]
pub enum ReduceError {
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("degenerate input: all rows are identical")]
    Degenerate,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("projection produced a non-finite coordinate at row {0}")]
    NonFinite(usize),
    #[error("grid config: {0}")]
    Grid(String),
    #[error("duplicate output id {0}")]
    DuplicateOutput(String),
}

/// One reduction method with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum ReductionSpec {
    Tsne(TsneParams),
    Pca,
    Mds,
}

impl ReductionSpec {
    pub fn method(&self) -> &'static str {
        match self {
            ReductionSpec::Tsne(_) => "tsne",
            ReductionSpec::Pca => "pca",
            ReductionSpec::Mds => "mds",
        }
    }

    /// Method parameters as JSON; `{}` for the parameter-free methods.
    pub fn params_json(&self) -> serde_json::Value {
        match self {
            ReductionSpec::Tsne(p) => serde_json::to_value(p).expect("params serialize"),
            _ => serde_json::json!({}),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_kl: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kl_after_exaggeration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub effective_perplexity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub explained_variance: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub explained_variance_ratio: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eigenvalues: Option<[f64; 2]>,
}

/// N x 2 coordinates in corpus order plus method diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding2d {
    pub coords: Vec<[f64; 2]>,
    pub diagnostics: Diagnostics,
}

impl Embedding2d {
    fn checked(coords: Vec<[f64; 2]>, diagnostics: Diagnostics) -> Result<Self, ReduceError> {
        if let Some(row) = coords.iter().position(|c| !c[0].is_finite() || !c[1].is_finite()) {
            return Err(ReduceError::NonFinite(row));
        }
        Ok(Self {
            coords,
            diagnostics,
        })
    }
}

/// Runs whichever method `spec` names.
pub fn reduce(
    matrix: &crate::embedding::EmbeddingMatrix,
    spec: &ReductionSpec,
) -> Result<Embedding2d, ReduceError> {
    match spec {
        ReductionSpec::Tsne(p) => tsne_2d(matrix, p),
        ReductionSpec::Pca => pca_2d(matrix),
        ReductionSpec::Mds => mds_2d(matrix),
    }
}

fn require_rows(n: usize, needed: usize) -> Result<(), ReduceError> {
    if n < needed {
        return Err(ReduceError::TooFewRows { needed, got: n });
    }
    Ok(())
}
