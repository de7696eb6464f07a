//! DBSCAN over 2-D projections.

use std::collections::HashMap;
use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::ingest::CleanCorpus;

pub const NOISE: i32 = -1;
const UNVISITED: i32 = -2;
/// Share of the bounding-box diagonal used when eps is "auto".
pub const AUTO_EPS_FRACTION: f64 = 0.05;
const SUMMARY_SAMPLE: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("cannot cluster zero points")]
    Empty,
    #[error("non-finite coordinate at row {0}")]
    NonFinite(usize),
    #[error("invalid cluster parameters: {0}")]
    InvalidParams(String),
}

/// Neighbourhood radius: a positive value or resolved from the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eps {
    Auto,
    Value(f64),
}

impl Serialize for Eps {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Eps::Auto => s.serialize_str("auto"),
            Eps::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Eps {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct EpsVisitor;
        impl Visitor<'_> for EpsVisitor {
            type Value = Eps;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number or \"auto\"")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Eps, E> {
                if v == "auto" {
                    Ok(Eps::Auto)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Eps, E> {
                Ok(Eps::Value(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Eps, E> {
                Ok(Eps::Value(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Eps, E> {
                Ok(Eps::Value(v as f64))
            }
        }
        d.deserialize_any(EpsVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub eps: Eps,
    pub min_pts: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            eps: Eps::Auto,
            min_pts: 5,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.min_pts < 1 {
            return Err(ClusterError::InvalidParams("min_pts must be at least 1".into()));
        }
        if let Eps::Value(v) = self.eps {
            if !(v.is_finite() && v > 0.0) {
                return Err(ClusterError::InvalidParams(format!("eps must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub eps: f64,
    pub min_pts: usize,
}

/// Labels in corpus order: `-1` noise, clusters `0..cluster_count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLabeling {
    pub labels: Vec<i32>,
    pub cluster_count: usize,
    pub params_used: ResolvedParams,
}

/// 5% of the bounding-box diagonal.
pub fn auto_eps(coords: &[[f64; 2]]) -> f64 {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in coords {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    AUTO_EPS_FRACTION * (hi[0] - lo[0]).hypot(hi[1] - lo[1])
}

/// Uniform grid of cells slightly wider than eps, so every eps-neighbour sits
/// in one of the 3 x 3 surrounding cells.
struct CellGrid<'a> {
    coords: &'a [[f64; 2]],
    eps_sq: f64,
    inv_cell: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl<'a> CellGrid<'a> {
    fn new(coords: &'a [[f64; 2]], eps: f64) -> Self {
        let cell = if eps > 0.0 { eps * (1.0 + 1e-9) } else { 1.0 };
        let inv_cell = 1.0 / cell;
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in coords.iter().enumerate() {
            cells.entry(Self::key(p, inv_cell)).or_default().push(i);
        }
        Self {
            coords,
            eps_sq: eps * eps,
            inv_cell,
            cells,
        }
    }

    fn key(p: &[f64; 2], inv_cell: f64) -> (i64, i64) {
        ((p[0] * inv_cell).floor() as i64, (p[1] * inv_cell).floor() as i64)
    }

    fn for_each_neighbor(&self, i: usize, mut f: impl FnMut(usize)) {
        let p = self.coords[i];
        let (cx, cy) = Self::key(&p, self.inv_cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(bucket) = self.cells.get(&(cx.saturating_add(dx), cy.saturating_add(dy))) else {
                    continue;
                };
                for &j in bucket {
                    let q = self.coords[j];
                    let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
                    if d2 <= self.eps_sq {
                        f(j);
                    }
                }
            }
        }
    }
}

fn validate_coords(coords: &[[f64; 2]]) -> Result<(), ClusterError> {
    if coords.is_empty() {
        return Err(ClusterError::Empty);
    }
    if let Some(i) = coords.iter().position(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(ClusterError::NonFinite(i));
    }
    Ok(())
}

pub fn resolve(coords: &[[f64; 2]], params: &ClusterParams) -> ResolvedParams {
    ResolvedParams {
        eps: match params.eps {
            Eps::Auto => auto_eps(coords),
            Eps::Value(v) => v,
        },
        min_pts: params.min_pts,
    }
}

/// Renumbers clusters by their smallest member index.
pub(crate) fn canonical_numbering(labels: &mut [i32]) -> usize {
    let mut first_seen: HashMap<i32, i32> = HashMap::new();
    for l in labels.iter_mut() {
        if *l >= 0 {
            let next = first_seen.len() as i32;
            *l = *first_seen.entry(*l).or_insert(next);
        }
    }
    first_seen.len()
}

/// Index-ordered DBSCAN with Euclidean distance; neighbourhoods include the point itself.
pub fn dbscan(coords: &[[f64; 2]], params: &ClusterParams) -> Result<ClusterLabeling, ClusterError> {
    validate_coords(coords)?;
    params.validate()?;
    let resolved = resolve(coords, params);
    let grid = CellGrid::new(coords, resolved.eps);
    let n = coords.len();

    let core: Vec<bool> = (0..n)
        .map(|i| {
            let mut count = 0;
            grid.for_each_neighbor(i, |_| count += 1);
            count >= resolved.min_pts
        })
        .collect();

    let mut labels = vec![UNVISITED; n];
    let mut next = 0;
    let mut queue = std::collections::VecDeque::new();
    for i in 0..n {
        if labels[i] != UNVISITED {
            continue;
        }
        if !core[i] {
            labels[i] = NOISE;
            continue;
        }
        let cluster = next;
        next += 1;
        labels[i] = cluster;
        queue.push_back(i);
        while let Some(p) = queue.pop_front() {
            grid.for_each_neighbor(p, |q| {
                if labels[q] == UNVISITED || labels[q] == NOISE {
                    labels[q] = cluster;
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            });
        }
    }
    let cluster_count = canonical_numbering(&mut labels);
    let labeling = ClusterLabeling {
        labels,
        cluster_count,
        params_used: resolved,
    };
    #[cfg(debug_assertions)]
    check_core_soundness(coords, &labeling).expect("dbscan labeling is sound");
    Ok(labeling)
}

/// Every core point sits in a cluster, and every clustered point is within
/// eps of a core point of the same cluster.
pub fn check_core_soundness(coords: &[[f64; 2]], labeling: &ClusterLabeling) -> Result<(), String> {
    let grid = CellGrid::new(coords, labeling.params_used.eps);
    for (i, &label) in labeling.labels.iter().enumerate() {
        let mut count = 0;
        let mut near_same_core = false;
        grid.for_each_neighbor(i, |_| count += 1);
        let is_core = count >= labeling.params_used.min_pts;
        if is_core && label == NOISE {
            return Err(format!("core point {i} labeled noise"));
        }
        if label >= 0 && !is_core {
            grid.for_each_neighbor(i, |j| {
                let mut c = 0;
                grid.for_each_neighbor(j, |_| c += 1);
                if labeling.labels[j] == label && c >= labeling.params_used.min_pts {
                    near_same_core = true;
                }
            });
            if !near_same_core {
                return Err(format!("border point {i} has no core neighbour in cluster {label}"));
            }
        }
        if label < NOISE || label >= labeling.cluster_count as i32 {
            return Err(format!("label {label} out of range at {i}"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster_id: i32,
    pub size: usize,
    pub sample_ids: Vec<String>,
    pub sample_descriptors: Vec<String>,
}

/// Clusters by size descending, ties by id; samples are the first members in corpus order.
pub fn cluster_summary(labeling: &ClusterLabeling, corpus: &CleanCorpus) -> Vec<ClusterSummary> {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); labeling.cluster_count];
    for (i, &l) in labeling.labels.iter().enumerate() {
        if l >= 0 {
            members[l as usize].push(i);
        }
    }
    let mut out: Vec<ClusterSummary> = members
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(id, m)| {
            let sample = &m[..m.len().min(SUMMARY_SAMPLE)];
            ClusterSummary {
                cluster_id: id as i32,
                size: m.len(),
                sample_ids: sample.iter().map(|&i| corpus.items[i].id.clone()).collect(),
                sample_descriptors: sample
                    .iter()
                    .map(|&i| corpus.items[i].canonical_text.clone())
                    .collect(),
            }
        })
        .collect();
    out.sort_by(|a, b| b.size.cmp(&a.size).then(a.cluster_id.cmp(&b.cluster_id)));
    out
}
