use super::linalg::{fix_sign, top_eigenpairs, DenseSymmetric};
use super::{require_rows, Diagnostics, Embedding2d, ReduceError};
use crate::embedding::EmbeddingMatrix;

/// Column-centered copy of the matrix data; `None` when every row is identical.
pub(super) fn center_columns(matrix: &EmbeddingMatrix) -> Option<Vec<f64>> {
    let (n, d) = (matrix.len(), matrix.dim());
    let mut mean = vec![0.0; d];
    for row in matrix.rows() {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let identical = matrix.rows().all(|r| r == matrix.row(0));
    if identical {
        return None;
    }
    let mut out = matrix.as_slice().to_vec();
    for row in out.chunks_exact_mut(d) {
        for (x, m) in row.iter_mut().zip(&mean) {
            *x -= m;
        }
    }
    Some(out)
}

pub fn pca_2d(matrix: &EmbeddingMatrix) -> Result<Embedding2d, ReduceError> {
    let (n, d) = (matrix.len(), matrix.dim());
    require_rows(n, 3)?;
    let xc = center_columns(matrix).ok_or(ReduceError::Degenerate)?;

    let mut cov = DenseSymmetric::zeros(d);
    for row in xc.chunks_exact(d) {
        for i in 0..d {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            for j in i..d {
                cov.data[i * d + j] += ri * row[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov.get(i, j) / denom;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }
    let trace: f64 = (0..d).map(|i| cov.get(i, i)).sum();

    let mut pairs = top_eigenpairs(&cov, 2);
    for p in &mut pairs {
        fix_sign(&mut p.vector);
    }
    let coords = xc
        .chunks_exact(d)
        .map(|row| {
            [
                row.iter().zip(&pairs[0].vector).map(|(a, b)| a * b).sum(),
                row.iter().zip(&pairs[1].vector).map(|(a, b)| a * b).sum(),
            ]
        })
        .collect();
    let variance = [pairs[0].value.max(0.0), pairs[1].value.max(0.0)];
    Embedding2d::checked(
        coords,
        Diagnostics {
            explained_variance: Some(variance),
            explained_variance_ratio: Some([variance[0] / trace, variance[1] / trace]),
            ..Default::default()
        },
    )
}
