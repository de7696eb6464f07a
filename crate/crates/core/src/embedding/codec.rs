//! EMB1 binary and JSONL encodings.
//!
//! EMB1 layout (all little-endian): magic `EMB1`, u32 version, u32 count, u32
//! dim, `count` id records (u32 byte length + UTF-8), then `count * dim` f32
//! components row-major.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EmbeddingError, EmbeddingMatrix};
use crate::ingest::CleanCorpus;

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";
pub const EMB1_VERSION: u32 = 1;

const MAX_REPORTED_OFFENDERS: usize = 10;

/// Components are narrowed to f32.
pub fn encode_emb1(matrix: &EmbeddingMatrix) -> Vec<u8> {
    let ids_len: usize = matrix.item_ids().iter().map(|id| 4 + id.len()).sum();
    let mut out = Vec::with_capacity(16 + ids_len + matrix.as_slice().len() * 4);
    out.extend_from_slice(EMB1_MAGIC);
    out.extend_from_slice(&EMB1_VERSION.to_le_bytes());
    out.extend_from_slice(&(matrix.len() as u32).to_le_bytes());
    out.extend_from_slice(&(matrix.dim() as u32).to_le_bytes());
    for id in matrix.item_ids() {
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id.as_bytes());
    }
    for &x in matrix.as_slice() {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], EmbeddingError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| EmbeddingError::Format(format!("truncated while reading {what}")))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32, EmbeddingError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_emb1(model_id: &str, bytes: &[u8]) -> Result<EmbeddingMatrix, EmbeddingError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != EMB1_MAGIC {
        return Err(EmbeddingError::Format("missing EMB1 magic".into()));
    }
    let version = cur.u32("version")?;
    if version != EMB1_VERSION {
        return Err(EmbeddingError::Format(format!("unsupported EMB1 version {version}")));
    }
    let count = cur.u32("count")? as usize;
    let dim = cur.u32("dim")? as usize;
    let mut ids = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let len = cur.u32("id length")? as usize;
        let raw = cur.take(len, "id")?;
        let id = std::str::from_utf8(raw)
            .map_err(|e| EmbeddingError::Format(format!("id is not UTF-8: {e}")))?;
        ids.push(id.to_string());
    }
    let n_components = count
        .checked_mul(dim)
        .ok_or_else(|| EmbeddingError::Format("count * dim overflows".into()))?;
    let body = cur.take(n_components * 4, "components")?;
    if cur.pos != bytes.len() {
        return Err(EmbeddingError::Format(format!(
            "{} trailing bytes after components",
            bytes.len() - cur.pos
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
        .collect();
    EmbeddingMatrix::new(model_id, ids, dim, data)
}

#[derive(Serialize, Deserialize)]
struct JsonRow {
    id: String,
    vector: Vec<f64>,
}

pub fn encode_jsonl(matrix: &EmbeddingMatrix) -> String {
    let mut out = String::new();
    for (id, row) in matrix.item_ids().iter().zip(matrix.rows()) {
        let line = serde_json::to_string(&JsonRow {
            id: id.clone(),
            vector: row.to_vec(),
        })
        .expect("finite vectors serialize");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn decode_jsonl(model_id: &str, content: &str) -> Result<EmbeddingMatrix, EmbeddingError> {
    let mut ids = Vec::new();
    let mut data = Vec::new();
    let mut dim = None;
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        // serde_json rejects NaN/Infinity literals, so non-finite rows surface here
        let row: JsonRow = serde_json::from_str(line)
            .map_err(|e| EmbeddingError::Format(format!("line {}: {e}", idx + 1)))?;
        let d = *dim.get_or_insert(row.vector.len());
        if row.vector.len() != d {
            return Err(EmbeddingError::DimMismatch {
                left: d,
                right: row.vector.len(),
            });
        }
        ids.push(row.id);
        data.extend(row.vector);
    }
    EmbeddingMatrix::new(model_id, ids, dim.unwrap_or(0), data)
}

/// Reads either encoding, sniffing the EMB1 magic.
pub fn read_embeddings(model_id: &str, path: &Path) -> Result<EmbeddingMatrix, EmbeddingError> {
    let bytes = fs::read(path).map_err(|source| EmbeddingError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.starts_with(EMB1_MAGIC) {
        decode_emb1(model_id, &bytes)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|e| EmbeddingError::Format(format!("not EMB1 and not UTF-8: {e}")))?;
        decode_jsonl(model_id, &text)
    }
}

/// Loads a file and reorders its rows into corpus id order.
pub fn load_embeddings(
    model_id: &str,
    path: &Path,
    corpus: &CleanCorpus,
) -> Result<EmbeddingMatrix, EmbeddingError> {
    align_to_corpus(read_embeddings(model_id, path)?, corpus)
}

pub(crate) fn align_to_corpus(
    matrix: EmbeddingMatrix,
    corpus: &CleanCorpus,
) -> Result<EmbeddingMatrix, EmbeddingError> {
    let mut position: HashMap<&str, usize> = HashMap::with_capacity(matrix.len());
    for (i, id) in matrix.item_ids().iter().enumerate() {
        if position.insert(id.as_str(), i).is_some() {
            return Err(EmbeddingError::DuplicateId(id.clone()));
        }
    }
    let wanted: HashSet<&str> = corpus.items.iter().map(|i| i.id.as_str()).collect();
    let missing: Vec<String> = corpus
        .items
        .iter()
        .filter(|i| !position.contains_key(i.id.as_str()))
        .map(|i| i.id.clone())
        .collect();
    let surplus: Vec<String> = matrix
        .item_ids()
        .iter()
        .filter(|id| !wanted.contains(id.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() || !surplus.is_empty() {
        return Err(EmbeddingError::Alignment {
            missing_total: missing.len(),
            surplus_total: surplus.len(),
            missing: missing.into_iter().take(MAX_REPORTED_OFFENDERS).collect(),
            surplus: surplus.into_iter().take(MAX_REPORTED_OFFENDERS).collect(),
        });
    }
    let dim = matrix.dim();
    let mut data = Vec::with_capacity(matrix.as_slice().len());
    for item in &corpus.items {
        data.extend_from_slice(matrix.row(position[item.id.as_str()]));
    }
    EmbeddingMatrix::new(matrix.model_id(), corpus.ids(), dim, data)
}
