use super::linalg::{fix_sign, top_eigenpairs, CenteredGram, DenseSymmetric, EigenPair, SymmetricOperator};
use super::pca::center_columns;
use super::{require_rows, Diagnostics, Embedding2d, ReduceError};
use crate::embedding::EmbeddingMatrix;

/// Above this many rows the double-centered matrix is not materialized; for
/// Euclidean input it equals the Gram matrix of the column-centered rows.
const DENSE_ROW_LIMIT: usize = 3000;

/// Classical MDS of the rows as given, using Euclidean distances.
pub fn mds_2d(matrix: &EmbeddingMatrix) -> Result<Embedding2d, ReduceError> {
    mds_with_limit(matrix, DENSE_ROW_LIMIT)
}

fn mds_with_limit(matrix: &EmbeddingMatrix, dense_limit: usize) -> Result<Embedding2d, ReduceError> {
    let n = matrix.len();
    require_rows(n, 3)?;
    if n <= dense_limit {
        let mut sq = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d2: f64 = matrix
                    .row(i)
                    .iter()
                    .zip(matrix.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                sq[i * n + j] = d2;
                sq[j * n + i] = d2;
            }
        }
        return classical_mds(&sq, n);
    }
    let xc = center_columns(matrix).ok_or(ReduceError::Degenerate)?;
    let gram = CenteredGram {
        rows: n,
        cols: matrix.dim(),
        data: &xc,
    };
    finish(&gram)
}

/// Torgerson scaling of an n x n squared-distance matrix (row-major).
pub fn classical_mds(sq_dist: &[f64], n: usize) -> Result<Embedding2d, ReduceError> {
    require_rows(n, 3)?;
    if sq_dist.len() != n * n {
        return Err(ReduceError::InvalidParams(format!(
            "{} entries for a {n} x {n} distance matrix",
            sq_dist.len()
        )));
    }
    if sq_dist.iter().all(|&d| d == 0.0) {
        return Err(ReduceError::Degenerate);
    }
    let row_mean: Vec<f64> = sq_dist
        .chunks_exact(n)
        .map(|r| r.iter().sum::<f64>() / n as f64)
        .collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let mut b = DenseSymmetric::zeros(n);
    for i in 0..n {
        for j in i..n {
            let v = -0.5 * (sq_dist[i * n + j] - row_mean[i] - row_mean[j] + grand);
            b.set(i, j, v);
            b.set(j, i, v);
        }
    }
    finish(&b)
}

fn finish(op: &dyn SymmetricOperator) -> Result<Embedding2d, ReduceError> {
    let mut pairs: Vec<EigenPair> = top_eigenpairs(op, 2);
    for p in &mut pairs {
        fix_sign(&mut p.vector);
    }
    let scale = [pairs[0].value.max(0.0).sqrt(), pairs[1].value.max(0.0).sqrt()];
    let coords = (0..op.n())
        .map(|i| [pairs[0].vector[i] * scale[0], pairs[1].vector[i] * scale[1]])
        .collect();
    Embedding2d::checked(
        coords,
        Diagnostics {
            eigenvalues: Some([pairs[0].value, pairs[1].value]),
            ..Default::default()
        },
    )
}
