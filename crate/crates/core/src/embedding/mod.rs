//! Per-model embedding matrices aligned to the clean corpus.

mod catalog;
mod codec;
mod hashing;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use catalog::{CatalogEntry, ModelCatalog, ModelSource};
pub use codec::{
    decode_emb1, decode_jsonl, encode_emb1, encode_jsonl, load_embeddings, read_embeddings,
    EMB1_MAGIC, EMB1_VERSION,
};
pub use hashing::hash_embed;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("{}: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed embedding data: {0}")]
    Format(String),
    #[error("embedding ids do not match the corpus: missing {missing:?}, surplus {surplus:?} ({missing_total} missing, {surplus_total} surplus in total)")]
    Alignment {
        missing: Vec<String>,
        surplus: Vec<String>,
        missing_total: usize,
        surplus_total: usize,
    },
    #[error("non-finite component at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("row {0} has zero norm")]
    ZeroRow(usize),
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("embedding dimension must be at least 2, got {0}")]
    InvalidDim(usize),
    #[error("duplicate id '{0}' in embedding data")]
    DuplicateId(String),
}

/// An N x D block of vectors for one model; row `i` belongs to `item_ids[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    model_id: String,
    dim: usize,
    item_ids: Vec<String>,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(
        model_id: impl Into<String>,
        item_ids: Vec<String>,
        dim: usize,
        data: Vec<f64>,
    ) -> Result<Self, EmbeddingError> {
        if dim < 2 {
            return Err(EmbeddingError::InvalidDim(dim));
        }
        if data.len() != item_ids.len() * dim {
            return Err(EmbeddingError::Format(format!(
                "{} components for {} rows of dimension {dim}",
                data.len(),
                item_ids.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(EmbeddingError::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self {
            model_id: model_id.into(),
            dim,
            item_ids,
            data,
        })
    }

    pub fn from_rows(
        model_id: impl Into<String>,
        item_ids: Vec<String>,
        rows: &[Vec<f64>],
    ) -> Result<Self, EmbeddingError> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(EmbeddingError::DimMismatch {
                left: dim,
                right: bad.len(),
            });
        }
        Self::new(model_id, item_ids, dim, rows.concat())
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.item_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.item_ids.is_empty()
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Row-major components.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn with_model_id(mut self, model_id: impl Into<String>) -> Self {
        self.model_id = model_id.into();
        self
    }

    /// SHA-256 of the EMB1 encoding, hex.
    pub fn content_hash(&self) -> String {
        crate::digest::sha256_hex(&encode_emb1(self))
    }
}

/// Scales every row to unit Euclidean norm.
pub fn normalize_rows(matrix: EmbeddingMatrix) -> Result<EmbeddingMatrix, EmbeddingError> {
    let dim = matrix.dim;
    let mut data = matrix.data;
    for (i, row) in data.chunks_exact_mut(dim).enumerate() {
        let norm = norm(row);
        if norm == 0.0 {
            return Err(EmbeddingError::ZeroRow(i));
        }
        row.iter_mut().for_each(|x| *x /= norm);
    }
    Ok(EmbeddingMatrix { data, ..matrix })
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Angle between unit vectors scaled to [0, 1]: `arccos(u.v) / pi`.
pub fn angular_distance(u: &[f64], v: &[f64]) -> Result<f64, EmbeddingError> {
    if u.len() != v.len() {
        return Err(EmbeddingError::DimMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    Ok(angular_distance_unchecked(u, v))
}

/// Evaluated as `2 atan2(|u - v|, |u + v|)`, which equals `arccos(u.v)` on the
/// unit sphere but stays exact for identical vectors, where `acos` of a dot
/// product rounded below 1 would report a spurious ~1e-8.
#[inline]
pub(crate) fn angular_distance_unchecked(u: &[f64], v: &[f64]) -> f64 {
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt()) / std::f64::consts::PI
}
