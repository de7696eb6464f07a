use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{ReduceError, ReductionSpec};
use crate::cluster::ClusterParams;
use crate::digest::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub model_ids: Vec<String>,
    pub specs: Vec<ReductionSpec>,
    pub cluster_params: Vec<ClusterParams>,
}

impl GridConfig {
    pub fn size(&self) -> usize {
        self.model_ids.len() * self.specs.len() * self.cluster_params.len()
    }
}

/// One (model, reduction, clustering) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub output_id: String,
    pub model_id: String,
    pub spec: ReductionSpec,
    pub cluster_params: ClusterParams,
}

/// `{method}-{first 16 hex of sha256(canonical parameter JSON)}`.
pub fn output_id(model_id: &str, spec: &ReductionSpec, cluster: &ClusterParams) -> String {
    let canonical = serde_json::json!({
        "model_id": model_id,
        "method": spec.method(),
        "params": spec.params_json(),
        "cluster": cluster,
    });
    let hash = sha256_hex(canonical.to_string().as_bytes());
    format!("{}-{}", spec.method(), &hash[..16])
}

/// Cartesian product: models outer, specs middle, cluster params inner.
pub fn expand_grid(config: &GridConfig) -> Result<Vec<GridCell>, ReduceError> {
    if config.model_ids.is_empty() || config.specs.is_empty() || config.cluster_params.is_empty() {
        return Err(ReduceError::Grid(
            "model_ids, specs and cluster_params must all be non-empty".into(),
        ));
    }
    for spec in &config.specs {
        if let ReductionSpec::Tsne(p) = spec {
            p.validate()?;
        }
    }
    for c in &config.cluster_params {
        c.validate().map_err(|e| ReduceError::Grid(e.to_string()))?;
    }
    let mut seen = HashSet::new();
    let mut cells = Vec::with_capacity(config.size());
    for model_id in &config.model_ids {
        for spec in &config.specs {
            for cluster in &config.cluster_params {
                let id = output_id(model_id, spec, cluster);
                if !seen.insert(id.clone()) {
                    return Err(ReduceError::DuplicateOutput(id));
                }
                cells.push(GridCell {
                    output_id: id,
                    model_id: model_id.clone(),
                    spec: spec.clone(),
                    cluster_params: *cluster,
                });
            }
        }
    }
    Ok(cells)
}
