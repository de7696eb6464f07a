//! Dense symmetric eigensolvers for the 2-D projections.
//!
//! Small problems are diagonalized completely with cyclic Jacobi rotations.
//! Larger ones use seeded subspace iteration with Rayleigh-Ritz extraction,
//! which only needs matrix-vector products.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Symmetric operator of order `n()`.
pub trait SymmetricOperator {
    fn n(&self) -> usize;
    /// `y = A x`
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Row-major dense symmetric matrix.
#[derive(Debug, Clone)]
pub struct DenseSymmetric {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DenseSymmetric {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }
}

impl SymmetricOperator for DenseSymmetric {
    fn n(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (yi, row) in y.iter_mut().zip(self.data.chunks_exact(self.n)) {
            *yi = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// `Xc Xc^T` for a row-major centered N x D matrix, applied without forming it.
pub struct CenteredGram<'a> {
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
}

impl SymmetricOperator for CenteredGram<'_> {
    fn n(&self) -> usize {
        self.rows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut t = vec![0.0; self.cols];
        for (row, &xi) in self.data.chunks_exact(self.cols).zip(x) {
            for (tj, &a) in t.iter_mut().zip(row) {
                *tj += a * xi;
            }
        }
        for (yi, row) in y.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *yi = row.iter().zip(&t).map(|(a, b)| a * b).sum();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

/// Full eigendecomposition by cyclic Jacobi; pairs sorted by descending value.
pub fn jacobi_eigen(a: &DenseSymmetric) -> Vec<EigenPair> {
    let n = a.n;
    let mut m = a.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob: f64 = m.iter().map(|x| x * x).sum();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        if off <= 1e-30 * frob || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut pairs: Vec<EigenPair> = (0..n)
        .map(|j| EigenPair {
            value: m[j * n + j],
            vector: (0..n).map(|i| v[i * n + j]).collect(),
        })
        .collect();
    pairs.sort_by(|a, b| b.value.total_cmp(&a.value));
    pairs
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram-Schmidt, run twice. Columns that collapse are replaced by
/// fresh random directions so the basis keeps full width.
fn orthonormalize(cols: &mut [Vec<f64>], rng: &mut ChaCha8Rng) {
    for j in 0..cols.len() {
        for attempt in 0..4 {
            let scale = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            for _pass in 0..2 {
                for i in 0..j {
                    let (head, tail) = cols.split_at_mut(j);
                    let proj = dot(&head[i], &tail[0]);
                    for (x, q) in tail[0].iter_mut().zip(&head[i]) {
                        *x -= proj * q;
                    }
                }
            }
            let norm = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-10 * scale.max(f64::MIN_POSITIVE) && norm > 0.0 {
                cols[j].iter_mut().for_each(|x| *x /= norm);
                break;
            }
            assert!(attempt < 3, "could not extend orthonormal basis");
            for x in cols[j].iter_mut() {
                *x = StandardNormal.sample(rng);
            }
        }
    }
}

const DENSE_LIMIT: usize = 64;
const OVERSAMPLE: usize = 10;
const MAX_ITERATIONS: usize = 5000;
const RESIDUAL_TOL: f64 = 1e-12;

/// The `k` algebraically largest eigenpairs of a positive semi-definite
/// operator, descending. Deterministic for a given operator.
pub fn top_eigenpairs(op: &dyn SymmetricOperator, k: usize) -> Vec<EigenPair> {
    let n = op.n();
    let k = k.min(n);
    if n <= DENSE_LIMIT {
        let mut dense = DenseSymmetric::zeros(n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            op.apply(&e, &mut col);
            for i in 0..n {
                dense.set(i, j, col[i]);
            }
        }
        // symmetrize away rounding asymmetry
        for i in 0..n {
            for j in i + 1..n {
                let avg = 0.5 * (dense.get(i, j) + dense.get(j, i));
                dense.set(i, j, avg);
                dense.set(j, i, avg);
            }
        }
        let mut pairs = jacobi_eigen(&dense);
        pairs.truncate(k);
        return pairs;
    }

    let p = (k + OVERSAMPLE).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_e16e);
    let mut basis: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    orthonormalize(&mut basis, &mut rng);
    let mut images: Vec<Vec<f64>> = vec![vec![0.0; n]; p];
    let mut ritz: Vec<EigenPair> = Vec::new();

    for _iter in 0..MAX_ITERATIONS {
        for (q, z) in basis.iter().zip(images.iter_mut()) {
            op.apply(q, z);
        }
        let mut h = DenseSymmetric::zeros(p);
        for i in 0..p {
            for j in i..p {
                let v = 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]));
                h.set(i, j, v);
                h.set(j, i, v);
            }
        }
        let small = jacobi_eigen(&h);
        // Ritz vectors V = Q W and their images A V = Z W
        let mut vectors = vec![vec![0.0; n]; p];
        let mut mapped = vec![vec![0.0; n]; p];
        for (c, pair) in small.iter().enumerate() {
            for (r, &w) in pair.vector.iter().enumerate() {
                for ((v, av), (q, z)) in vectors[c]
                    .iter_mut()
                    .zip(mapped[c].iter_mut())
                    .zip(basis[r].iter().zip(&images[r]))
                {
                    *v += w * q;
                    *av += w * z;
                }
            }
        }
        let scale = small.iter().map(|e| e.value.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let converged = (0..k).all(|c| {
            let res: f64 = mapped[c]
                .iter()
                .zip(&vectors[c])
                .map(|(av, v)| (av - small[c].value * v).powi(2))
                .sum::<f64>()
                .sqrt();
            res <= RESIDUAL_TOL * scale
        });
        ritz = small
            .iter()
            .zip(&vectors)
            .take(k)
            .map(|(e, v)| EigenPair {
                value: e.value,
                vector: v.clone(),
            })
            .collect();
        if converged {
            break;
        }
        basis = mapped;
        orthonormalize(&mut basis, &mut rng);
    }
    ritz
}

/// Flips `v` so its largest-magnitude entry (first one on ties) is positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
