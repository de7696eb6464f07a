//! Exact nearest-neighbour search over unit embeddings with a vantage-point tree.
//!
//! Each node holds one vantage item and a radius (the lower median of the
//! distances from the vantage point to the rest of its subset). Items within
//! the radius go to the inside subtree, strictly farther ones to the outside.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{angular_distance_unchecked, EmbeddingMatrix};

/// Computed angular distances can violate the triangle inequality by a few
/// ulps of arccos; pruning keeps this much slack so search stays exact.
const PRUNE_SLACK: f64 = 1e-6;

pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("cannot build an index over an empty matrix")]
    Empty,
    #[error("unknown item id '{0}'")]
    UnknownId(String),
    #[error("query has dimension {query}, index has {index}")]
    DimMismatch { query: usize, index: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("tree cache is stale or incompatible: {0}")]
    StaleCache(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Node {
    item: u32,
    radius: f64,
    inside: Option<u32>,
    outside: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: String,
    pub index: usize,
    pub distance: f64,
}

/// Query point for [`VpTree::knn`].
#[derive(Debug, Clone, Copy)]
pub enum Query<'a> {
    Id(&'a str),
    Vector(&'a [f64]),
}

#[derive(Debug, Clone)]
pub struct VpTree {
    matrix: Arc<EmbeddingMatrix>,
    nodes: Vec<Node>,
    build_seed: u64,
    /// Position of each item id in ascending id order; used for tie-breaking.
    id_rank: Vec<u32>,
    positions: HashMap<String, usize>,
}

/// Serialized form of a tree's structure, bound to the matrix it indexes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VpTreeCache {
    pub version: u32,
    pub model_id: String,
    pub matrix_hash: String,
    pub build_seed: u64,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy)]
struct Ranked {
    distance: f64,
    rank: u32,
    index: u32,
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.rank.cmp(&other.rank))
    }
}

fn id_ranks(ids: &[String]) -> Vec<u32> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    let mut rank = vec![0u32; ids.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r as u32;
    }
    rank
}

fn positions(ids: &[String]) -> HashMap<String, usize> {
    ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect()
}

impl VpTree {
    pub fn build(matrix: Arc<EmbeddingMatrix>, seed: u64) -> Result<Self, IndexError> {
        let n = matrix.len();
        if n == 0 {
            return Err(IndexError::Empty);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut nodes: Vec<Node> = Vec::with_capacity(n);
        // (items, parent slot to patch: (node, is_inside))
        let mut work: Vec<(Vec<u32>, Option<(usize, bool)>)> =
            vec![((0..n as u32).collect(), None)];
        let mut dists: Vec<f64> = Vec::new();
        let mut scratch: Vec<f64> = Vec::new();

        while let Some((mut items, parent)) = work.pop() {
            let pick = rng.random_range(0..items.len());
            let vantage = items.remove(pick);
            let node_idx = nodes.len();
            if let Some((p, inside)) = parent {
                if inside {
                    nodes[p].inside = Some(node_idx as u32);
                } else {
                    nodes[p].outside = Some(node_idx as u32);
                }
            }
            if items.is_empty() {
                nodes.push(Node {
                    item: vantage,
                    radius: 0.0,
                    inside: None,
                    outside: None,
                });
                continue;
            }
            let vp = matrix.row(vantage as usize);
            dists.clear();
            dists.extend(
                items
                    .iter()
                    .map(|&i| angular_distance_unchecked(vp, matrix.row(i as usize))),
            );
            scratch.clear();
            scratch.extend_from_slice(&dists);
            let mid = (scratch.len() - 1) / 2;
            let (_, median, _) = scratch.select_nth_unstable_by(mid, f64::total_cmp);
            let radius = *median;

            let mut inside = Vec::with_capacity(mid + 1);
            let mut outside = Vec::with_capacity(items.len() - mid);
            for (&item, &d) in items.iter().zip(&dists) {
                if d <= radius {
                    inside.push(item);
                } else {
                    outside.push(item);
                }
            }
            debug_assert!(inside.len() > mid, "lower median keeps at least half inside");
            nodes.push(Node {
                item: vantage,
                radius,
                inside: None,
                outside: None,
            });
            // outside pushed first so the inside subtree is laid out next
            if !outside.is_empty() {
                work.push((outside, Some((node_idx, false))));
            }
            work.push((inside, Some((node_idx, true))));
        }

        let tree = Self {
            id_rank: id_ranks(matrix.item_ids()),
            positions: positions(matrix.item_ids()),
            matrix,
            nodes,
            build_seed: seed,
        };
        #[cfg(debug_assertions)]
        tree.check_invariants()
            .expect("freshly built tree satisfies the node invariant");
        Ok(tree)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn build_seed(&self) -> u64 {
        self.build_seed
    }

    pub fn matrix(&self) -> &Arc<EmbeddingMatrix> {
        &self.matrix
    }

    /// Number of nodes on the longest root-to-leaf path.
    pub fn height(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0u32, 1usize)];
        while let Some((node, depth)) = stack.pop() {
            best = best.max(depth);
            let n = &self.nodes[node as usize];
            for child in [n.inside, n.outside].into_iter().flatten() {
                stack.push((child, depth + 1));
            }
        }
        best
    }

    /// Verifies that every item appears exactly once and that each subtree
    /// respects its ancestor's radius.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = vec![false; self.matrix.len()];
        let mut stack = vec![0u32];
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx as usize];
            let item = node.item as usize;
            if std::mem::replace(&mut seen[item], true) {
                return Err(format!("item {item} appears twice"));
            }
            let vp = self.matrix.row(item);
            for (child, inside) in [(node.inside, true), (node.outside, false)] {
                let Some(child) = child else { continue };
                for member in self.subtree_items(child) {
                    let d = angular_distance_unchecked(vp, self.matrix.row(member as usize));
                    if inside && d > node.radius {
                        return Err(format!("inside item {member} at {d} > radius {}", node.radius));
                    }
                    if !inside && d <= node.radius {
                        return Err(format!("outside item {member} at {d} <= radius {}", node.radius));
                    }
                }
                stack.push(child);
            }
        }
        match seen.iter().position(|s| !s) {
            Some(missing) => Err(format!("item {missing} missing from tree")),
            None => Ok(()),
        }
    }

    fn subtree_items(&self, root: u32) -> Vec<u32> {
        let mut out = Vec::new();
        let mut stack = vec![root];
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx as usize];
            out.push(node.item);
            stack.extend([node.inside, node.outside].into_iter().flatten());
        }
        out
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.positions.get(id).copied()
    }

    fn resolve<'a>(&'a self, query: Query<'a>) -> Result<&'a [f64], IndexError> {
        match query {
            Query::Id(id) => {
                let idx = self
                    .index_of(id)
                    .ok_or_else(|| IndexError::UnknownId(id.to_string()))?;
                Ok(self.matrix.row(idx))
            }
            Query::Vector(v) if v.len() != self.matrix.dim() => Err(IndexError::DimMismatch {
                query: v.len(),
                index: self.matrix.dim(),
            }),
            Query::Vector(v) => Ok(v),
        }
    }

    /// Exact k nearest neighbours, ascending by distance then id. Ids in
    /// `exclude` never appear.
    pub fn knn(
        &self,
        query: Query<'_>,
        k: usize,
        exclude: &HashSet<String>,
    ) -> Result<Vec<Neighbor>, IndexError> {
        let ids = self.matrix.item_ids();
        let excluded: Vec<bool> = ids.iter().map(|id| exclude.contains(id)).collect();
        self.knn_filtered(query, k, |i| excluded[i])
    }

    /// Like [`knn`](Self::knn) with exclusion given as a predicate over row indices.
    pub fn knn_filtered(
        &self,
        query: Query<'_>,
        k: usize,
        is_excluded: impl Fn(usize) -> bool,
    ) -> Result<Vec<Neighbor>, IndexError> {
        if k == 0 {
            return Err(IndexError::ZeroK);
        }
        let q = self.resolve(query)?;
        let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(k + 1);
        let mut stack: Vec<(u32, f64)> = vec![(0, 0.0)];
        while let Some((idx, lower_bound)) = stack.pop() {
            let tau = if heap.len() == k {
                heap.peek().map_or(f64::INFINITY, |w| w.distance)
            } else {
                f64::INFINITY
            };
            if lower_bound > tau + PRUNE_SLACK {
                continue;
            }
            let node = &self.nodes[idx as usize];
            let item = node.item as usize;
            let d = angular_distance_unchecked(q, self.matrix.row(item));
            if !is_excluded(item) {
                let cand = Ranked {
                    distance: d,
                    rank: self.id_rank[item],
                    index: node.item,
                };
                if heap.len() < k {
                    heap.push(cand);
                } else if cand < *heap.peek().expect("heap is full") {
                    heap.pop();
                    heap.push(cand);
                }
            }
            let inside_bound = (d - node.radius).max(0.0);
            let outside_bound = (node.radius - d).max(0.0);
            let (near, far) = if d <= node.radius {
                ((node.inside, inside_bound), (node.outside, outside_bound))
            } else {
                ((node.outside, outside_bound), (node.inside, inside_bound))
            };
            if let Some(child) = far.0 {
                stack.push((child, far.1.max(lower_bound)));
            }
            if let Some(child) = near.0 {
                stack.push((child, near.1.max(lower_bound)));
            }
        }
        Ok(self.finish(heap.into_sorted_vec()))
    }

    /// All items within `radius` of the query, ascending by distance then id.
    pub fn range_query(&self, query: Query<'_>, radius: f64) -> Result<Vec<Neighbor>, IndexError> {
        let q = self.resolve(query)?;
        let mut found = Vec::new();
        let mut stack = vec![0u32];
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx as usize];
            let item = node.item as usize;
            let d = angular_distance_unchecked(q, self.matrix.row(item));
            if d <= radius {
                found.push(Ranked {
                    distance: d,
                    rank: self.id_rank[item],
                    index: node.item,
                });
            }
            if let Some(child) = node.inside {
                if d - node.radius <= radius + PRUNE_SLACK {
                    stack.push(child);
                }
            }
            if let Some(child) = node.outside {
                if node.radius - d <= radius + PRUNE_SLACK {
                    stack.push(child);
                }
            }
        }
        found.sort_unstable();
        Ok(self.finish(found))
    }

    fn finish(&self, ranked: Vec<Ranked>) -> Vec<Neighbor> {
        let ids = self.matrix.item_ids();
        ranked
            .into_iter()
            .map(|r| Neighbor {
                id: ids[r.index as usize].clone(),
                index: r.index as usize,
                distance: r.distance,
            })
            .collect()
    }

    pub fn to_cache(&self) -> VpTreeCache {
        VpTreeCache {
            version: CACHE_VERSION,
            model_id: self.matrix.model_id().to_string(),
            matrix_hash: self.matrix.content_hash(),
            build_seed: self.build_seed,
            nodes: self.nodes.clone(),
        }
    }

    /// Restores a tree from its cache; fails if the matrix changed since.
    pub fn from_cache(cache: VpTreeCache, matrix: Arc<EmbeddingMatrix>) -> Result<Self, IndexError> {
        if cache.version != CACHE_VERSION {
            return Err(IndexError::StaleCache(format!("version {}", cache.version)));
        }
        let hash = matrix.content_hash();
        if cache.matrix_hash != hash {
            return Err(IndexError::StaleCache(format!(
                "matrix hash {hash} does not match cached {}",
                cache.matrix_hash
            )));
        }
        if cache.nodes.len() != matrix.len() {
            return Err(IndexError::StaleCache("node count differs from matrix rows".into()));
        }
        let tree = Self {
            id_rank: id_ranks(matrix.item_ids()),
            positions: positions(matrix.item_ids()),
            matrix,
            nodes: cache.nodes,
            build_seed: cache.build_seed,
        };
        tree.check_invariants().map_err(IndexError::StaleCache)?;
        Ok(tree)
    }
}
