//! Independent brute-force reference implementations.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use taxonomist_core::embedding::{angular_distance, EmbeddingMatrix};

/// `n` random unit vectors, ids `i00000`...
pub fn random_unit_matrix(n: usize, dim: usize, seed: u64) -> Arc<EmbeddingMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        data.extend(v.iter().map(|x| x / norm));
    }
    let ids = (0..n).map(|i| format!("i{i:05}")).collect();
    Arc::new(EmbeddingMatrix::new("rand", ids, dim, data).unwrap())
}

/// Sorts every row by (distance, id) and keeps the first `k` not excluded.
pub fn brute_force_knn(
    matrix: &EmbeddingMatrix,
    query: &[f64],
    k: usize,
    excluded: impl Fn(usize) -> bool,
) -> Vec<(String, f64)> {
    let ids = matrix.item_ids();
    let mut all: Vec<(f64, &String)> = (0..matrix.len())
        .filter(|&i| !excluded(i))
        .map(|i| (angular_distance(query, matrix.row(i)).unwrap(), &ids[i]))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    all.into_iter().take(k).map(|(d, id)| (id.clone(), d)).collect()
}

/// Quadratic DBSCAN: components of core points joined within eps; a border
/// point joins the adjacent component whose smallest core index is lowest;
/// clusters numbered by smallest member index.
pub fn reference_dbscan(coords: &[[f64; 2]], eps: f64, min_pts: usize) -> Vec<i32> {
    let n = coords.len();
    let near = |i: usize, j: usize| {
        let (a, b) = (coords[i], coords[j]);
        (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) <= eps * eps
    };
    let core: Vec<bool> = (0..n)
        .map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts)
        .collect();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            if core[i] && core[j] && near(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    // after union by minimum index, a core point's root is its component's smallest core
    let mut root = vec![usize::MAX; n];
    for i in 0..n {
        if core[i] {
            root[i] = find(&mut parent, i);
        }
    }
    for i in 0..n {
        if !core[i] {
            root[i] = (0..n).filter(|&j| core[j] && near(i, j)).map(|j| root[j]).min().unwrap_or(usize::MAX);
        }
    }
    let mut numbering: HashMap<usize, i32> = HashMap::new();
    root.iter()
        .map(|&r| {
            if r == usize::MAX {
                -1
            } else {
                let next = numbering.len() as i32;
                *numbering.entry(r).or_insert(next)
            }
        })
        .collect()
}

/// Labels as a set partition: noise plus each cluster's member list.
pub fn partition(labels: &[i32]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let mut noise = Vec::new();
    let mut groups: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        if l < 0 {
            noise.push(i);
        } else {
            groups.entry(l).or_default().push(i);
        }
    }
    let mut clusters: Vec<Vec<usize>> = groups.into_values().collect();
    clusters.sort();
    (noise, clusters)
}

pub const BLOB_SIZE: usize = 100;
pub const BLOB_DIM: usize = 64;

/// Three unit-variance Gaussian blobs whose centres sit 20 apart along distinct axes.
pub fn three_blobs(seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut data = Vec::with_capacity(3 * BLOB_SIZE * BLOB_DIM);
    for b in 0..3 {
        for _ in 0..BLOB_SIZE {
            for d in 0..BLOB_DIM {
                let centre = if d == b { 20.0 } else { 0.0 };
                data.push(centre + noise.sample(&mut rng));
            }
        }
    }
    let ids = (0..3 * BLOB_SIZE).map(|i| format!("p{i:03}")).collect();
    EmbeddingMatrix::new("blobs", ids, BLOB_DIM, data).unwrap()
}

/// Minimum distance between blob centroids over the mean distance of points to their centroid.
pub fn separation_ratio(coords: &[[f64; 2]]) -> f64 {
    let centroids: Vec<[f64; 2]> = coords
        .chunks(BLOB_SIZE)
        .map(|c| {
            let s = c.iter().fold([0.0, 0.0], |a, p| [a[0] + p[0], a[1] + p[1]]);
            [s[0] / BLOB_SIZE as f64, s[1] / BLOB_SIZE as f64]
        })
        .collect();
    let spread: f64 = coords
        .chunks(BLOB_SIZE)
        .zip(&centroids)
        .map(|(c, m)| c.iter().map(|p| (p[0] - m[0]).hypot(p[1] - m[1])).sum::<f64>() / BLOB_SIZE as f64)
        .sum::<f64>()
        / 3.0;
    let mut min_between = f64::INFINITY;
    for a in 0..3 {
        for b in a + 1..3 {
            min_between = min_between.min((centroids[a][0] - centroids[b][0]).hypot(centroids[a][1] - centroids[b][1]));
        }
    }
    min_between / spread
}

/// Perplexity of a probability row, from its entries.
pub fn row_perplexity(row: &[f64]) -> f64 {
    row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum::<f64>().exp()
}

/// 200 points: a few Gaussian-ish clumps plus uniform noise, or an integer
/// lattice sample where many pairs sit exactly eps apart.
pub fn random_set(seed: u64) -> (Vec<[f64; 2]>, f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_pts = rng.random_range(2..=8);
    if seed % 5 == 0 {
        let pts = (0..200)
            .map(|_| [rng.random_range(0..20) as f64, rng.random_range(0..20) as f64])
            .collect();
        return (pts, 1.0, min_pts);
    }
    let clumps: Vec<[f64; 2]> = (0..rng.random_range(1..6))
        .map(|_| [rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)])
        .collect();
    let pts = (0..200)
        .map(|_| {
            if rng.random_bool(0.2) {
                [rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)]
            } else {
                let c = clumps[rng.random_range(0..clumps.len())];
                let spread = 6.0;
                [c[0] + rng.random_range(-spread..spread), c[1] + rng.random_range(-spread..spread)]
            }
        })
        .collect();
    (pts, rng.random_range(1.0..5.0), min_pts)
}

/// Random unit rows where about a tenth duplicate an earlier row, forcing ties.
pub fn corpus_with_ties(n: usize, dim: usize, seed: u64) -> Arc<EmbeddingMatrix> {
    let base = random_unit_matrix(n, dim, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd0d0);
    let mut data = base.as_slice().to_vec();
    for i in 1..n {
        if rng.random_bool(0.1) {
            let j = rng.random_range(0..i);
            let row = data[j * dim..(j + 1) * dim].to_vec();
            data[i * dim..(i + 1) * dim].copy_from_slice(&row);
        }
    }
    // shuffle id order relative to row order so tie-breaking by id is exercised
    let mut ids: Vec<String> = base.item_ids().to_vec();
    for i in (1..n).rev() {
        ids.swap(i, rng.random_range(0..=i));
    }
    Arc::new(EmbeddingMatrix::new("ties", ids, dim, data).unwrap())
}

/// KL(P || Q) for a joint affinity matrix and a layout, with Student-t Q.
pub fn tsne_kl(p: &[f64], y: &[[f64; 2]]) -> f64 {
    let n = y.len();
    let kernel = |i: usize, j: usize| 1.0 / (1.0 + (y[i][0] - y[j][0]).powi(2) + (y[i][1] - y[j][1]).powi(2));
    let z: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| kernel(i, j)).sum();
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p[i * n + j];
            if i != j && pij > 0.0 {
                kl += pij * (pij / (kernel(i, j) / z)).ln();
            }
        }
    }
    kl
}
