//! Exact t-SNE.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{require_rows, Diagnostics, Embedding2d, ReduceError};
use crate::embedding::EmbeddingMatrix;

const MAX_BISECTION_STEPS: usize = 50;
const ENTROPY_TOL: f64 = 1e-5;
const MOMENTUM_SWITCH: usize = 250;
const INITIAL_MOMENTUM: f64 = 0.5;
const FINAL_MOMENTUM: f64 = 0.8;
const MIN_GAIN: f64 = 0.01;
const INIT_STD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
}

impl Default for TsneParams {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            seed: 0,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
        }
    }
}

impl TsneParams {
    pub fn validate(&self) -> Result<(), ReduceError> {
        let bad = |m: &str| Err(ReduceError::InvalidParams(m.into()));
        if !(self.perplexity.is_finite() && self.perplexity > 0.0) {
            return bad("perplexity must be a positive number");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be a positive number");
        }
        if !(self.early_exaggeration.is_finite() && self.early_exaggeration > 0.0) {
            return bad("early_exaggeration must be a positive number");
        }
        if self.iterations < self.exaggeration_iters {
            return bad("iterations must be at least exaggeration_iters");
        }
        Ok(())
    }
}

/// Row-conditional affinities `p_{j|i}` (row-major, zero diagonal).
#[derive(Debug, Clone)]
pub struct ConditionalP {
    pub n: usize,
    pub p: Vec<f64>,
    pub betas: Vec<f64>,
    pub perplexity: f64,
}

fn squared_distances(matrix: &EmbeddingMatrix) -> Vec<f64> {
    let n = matrix.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = matrix
                .row(i)
                .iter()
                .zip(matrix.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Fills `out` with the Gaussian row at precision `beta`; returns its entropy in nats.
fn gaussian_row(dist: &[f64], skip: usize, dmin: f64, beta: f64, out: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (j, (&d, o)) in dist.iter().zip(out.iter_mut()).enumerate() {
        if j == skip {
            *o = 0.0;
            continue;
        }
        let w = (-beta * (d - dmin)).exp();
        *o = w;
        sum += w;
        weighted += w * (d - dmin);
    }
    out.iter_mut().for_each(|x| *x /= sum);
    sum.ln() + beta * weighted / sum
}

/// Bandwidth search per row so each row's perplexity matches `perplexity`.
pub fn conditional_probabilities(matrix: &EmbeddingMatrix, perplexity: f64) -> ConditionalP {
    let n = matrix.len();
    let dist = squared_distances(matrix);
    let target = perplexity.ln();
    // tight enough that the perplexity itself lands within 1e-5
    let tol = ENTROPY_TOL / perplexity.max(1.0);
    let mut p = vec![0.0; n * n];
    let mut betas = vec![0.0; n];
    for i in 0..n {
        let row = &dist[i * n..(i + 1) * n];
        let dmin = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &d)| d)
            .fold(f64::INFINITY, f64::min);
        let out = &mut p[i * n..(i + 1) * n];
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        let mut beta = 1.0;
        for _ in 0..MAX_BISECTION_STEPS {
            let h = gaussian_row(row, i, dmin, beta, out);
            if (h - target).abs() <= tol {
                break;
            }
            if h > target {
                lo = beta;
                beta = if hi.is_finite() { 0.5 * (lo + hi) } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = 0.5 * (lo + hi);
            }
        }
        gaussian_row(row, i, dmin, beta, out);
        betas[i] = beta;
    }
    ConditionalP {
        n,
        p,
        betas,
        perplexity,
    }
}

/// `(P + P^T) / 2N`: symmetric, sums to 1.
pub fn joint_probabilities(cond: &ConditionalP) -> Vec<f64> {
    let n = cond.n;
    let mut joint = vec![0.0; n * n];
    let denom = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            joint[i * n + j] = (cond.p[i * n + j] + cond.p[j * n + i]) / denom;
        }
    }
    joint
}

/// Student-t kernel values `1 / (1 + |y_i - y_j|^2)` (zero diagonal) and their sum.
fn kernel(y: &[[f64; 2]], num: &mut [f64]) -> f64 {
    let n = y.len();
    let mut z = 0.0;
    for i in 0..n {
        num[i * n + i] = 0.0;
        for j in i + 1..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let q = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = q;
            num[j * n + i] = q;
            z += 2.0 * q;
        }
    }
    z
}

fn kl_divergence(p: &[f64], y: &[[f64; 2]], num: &mut [f64]) -> f64 {
    let z = kernel(y, num);
    p.iter()
        .zip(num.iter())
        .filter(|(&pij, _)| pij > 0.0)
        .map(|(&pij, &q)| pij * (pij / (q / z).max(f64::MIN_POSITIVE)).ln())
        .sum()
}

pub fn tsne_2d(matrix: &EmbeddingMatrix, params: &TsneParams) -> Result<Embedding2d, ReduceError> {
    params.validate()?;
    let n = matrix.len();
    require_rows(n, 10)?;
    let perplexity = params.perplexity.min((n - 1) as f64 / 3.0);

    let p = joint_probabilities(&conditional_probabilities(matrix, perplexity));
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
        .collect();
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut num = vec![0.0; n * n];
    let mut grad = vec![[0.0; 2]; n];
    let mut kl_after_exaggeration = None;

    for t in 0..params.iterations {
        if t == params.exaggeration_iters {
            kl_after_exaggeration = Some(kl_divergence(&p, &y, &mut num));
        }
        let exaggeration = if t < params.exaggeration_iters {
            params.early_exaggeration
        } else {
            1.0
        };
        let momentum = if t < MOMENTUM_SWITCH {
            INITIAL_MOMENTUM
        } else {
            FINAL_MOMENTUM
        };
        let z = kernel(&y, &mut num);
        for i in 0..n {
            let (mut gx, mut gy) = (0.0, 0.0);
            let prow = &p[i * n..(i + 1) * n];
            let qrow = &num[i * n..(i + 1) * n];
            for j in 0..n {
                let coeff = (exaggeration * prow[j] - qrow[j] / z) * qrow[j];
                gx += coeff * (y[i][0] - y[j][0]);
                gy += coeff * (y[i][1] - y[j][1]);
            }
            grad[i] = [4.0 * gx, 4.0 * gy];
        }
        for i in 0..n {
            for c in 0..2 {
                let g = gains[i][c];
                let g = if (grad[i][c] > 0.0) != (update[i][c] > 0.0) {
                    g + 0.2
                } else {
                    g * 0.8
                };
                let g: f64 = g.max(MIN_GAIN);
                gains[i][c] = g;
                update[i][c] = momentum * update[i][c] - params.learning_rate * g * grad[i][c];
                y[i][c] += update[i][c];
            }
        }
        let mean = y.iter().fold([0.0, 0.0], |acc, v| [acc[0] + v[0], acc[1] + v[1]]);
        let mean = [mean[0] / n as f64, mean[1] / n as f64];
        for v in &mut y {
            v[0] -= mean[0];
            v[1] -= mean[1];
        }
    }
    let final_kl = kl_divergence(&p, &y, &mut num);
    Embedding2d::checked(
        y,
        Diagnostics {
            final_kl: Some(final_kl),
            kl_after_exaggeration: Some(kl_after_exaggeration.unwrap_or(final_kl)),
            effective_perplexity: Some(perplexity),
            ..Default::default()
        },
    )
}
