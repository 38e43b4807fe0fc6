//! ZCA whitening.
//!
//! The fitted transform is `E diag(1 / sqrt(lambda_i + epsilon)) E^T` for the
//! eigenpairs of the population covariance (1/M normalization). It is
//! symmetric, so whitened volumes stay in the original coordinates.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::volumes::LocalVolume;
use crate::Matrix;

impl AsRef<[f64]> for LocalVolume {
    fn as_ref(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningModel {
    pub mean: Vec<f64>,
    /// Symmetric `d x d` map.
    pub transform: Matrix,
    pub epsilon: f64,
}

// Fixed chunking keeps the covariance bits independent of thread count.
const CHUNK: usize = 256;

impl WhiteningModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `transform * (v - mean)`.
    pub fn apply_slice(&self, v: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
        let centered: Vec<f64> = v.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        // Symmetric, so row i equals the contiguous column i.
        Ok((0..d)
            .map(|i| math::dot(self.transform.column(i).as_slice(), &centered))
            .collect())
    }

    /// Whitens every column of a `d x N` matrix.
    pub fn apply_columns(&self, data: &Matrix) -> Result<Matrix> {
        if data.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: data.nrows(),
            });
        }
        let mut centered = data.clone();
        for mut col in centered.column_iter_mut() {
            for (a, m) in col.iter_mut().zip(&self.mean) {
                *a -= m;
            }
        }
        Ok(&self.transform * centered)
    }
}

pub fn fit_whitening<V: AsRef<[f64]> + Sync>(volumes: &[V], epsilon: f64) -> Result<WhiteningModel> {
    let first = volumes.first().ok_or(Error::EmptyInput)?;
    let d = first.as_ref().len();
    if d == 0 {
        return Err(Error::EmptyInput);
    }
    if let Some(bad) = volumes.iter().find(|v| v.as_ref().len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.as_ref().len(),
        });
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidConfig("whitening epsilon must be non-negative"));
    }
    let m = volumes.len() as f64;

    let chunks: Vec<&[V]> = volumes.chunks(CHUNK).collect();
    let sums: Vec<Vec<f64>> = map_chunks(&chunks, |chunk| {
        let mut s = alloc::vec![0.0; d];
        for v in chunk {
            for (acc, a) in s.iter_mut().zip(v.as_ref()) {
                *acc += a;
            }
        }
        s
    });
    let refs: Vec<&[f64]> = sums.iter().map(|s| s.as_slice()).collect();
    let mean: Vec<f64> = math::pairwise_sum(&refs, d).into_iter().map(|s| s / m).collect();

    let partials: Vec<Matrix> = map_chunks(&chunks, |chunk| {
        let mut x = Matrix::zeros(d, chunk.len());
        for (j, v) in chunk.iter().enumerate() {
            for (i, (a, mu)) in v.as_ref().iter().zip(&mean).enumerate() {
                x[(i, j)] = a - mu;
            }
        }
        &x * x.transpose()
    });
    let mut cov = math::pairwise_reduce(partials).ok_or(Error::EmptyInput)?;
    cov /= m;
    symmetrize(&mut cov);

    let transform = zca_from_covariance(cov, epsilon)?;
    Ok(WhiteningModel {
        mean,
        transform,
        epsilon,
    })
}

/// `E diag(1/sqrt(max(lambda, 0) + epsilon)) E^T`.
pub fn zca_from_covariance(cov: Matrix, epsilon: f64) -> Result<Matrix> {
    let eig = cov.symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    // Below this an eigenvalue is rounding noise around zero.
    let floor = top * 1e-13;
    let mut scaled = eig.eigenvectors.clone();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let lambda = if lambda <= floor { 0.0 } else { lambda };
        let denom = lambda + epsilon;
        if !(denom > 0.0) {
            return Err(Error::SingularCovariance);
        }
        let s = 1.0 / math::sqrt(denom);
        for a in scaled.column_mut(k).iter_mut() {
            *a *= s;
        }
    }
    let mut t = &scaled * eig.eigenvectors.transpose();
    symmetrize(&mut t);
    Ok(t)
}

pub fn apply_whitening(model: &WhiteningModel, v: &LocalVolume) -> Result<LocalVolume> {
    Ok(LocalVolume {
        data: model.apply_slice(&v.data)?,
        origin: v.origin,
    })
}

fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

#[cfg(feature = "parallel")]
fn map_chunks<V: Sync, R: Send>(chunks: &[&[V]], f: impl Fn(&[V]) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    chunks.par_iter().map(|c| f(c)).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_chunks<V, R>(chunks: &[&[V]], f: impl Fn(&[V]) -> R) -> Vec<R> {
    chunks.iter().map(|c| f(c)).collect()
}
