//! Sparsifying transform learning:
//! `min 1/2 ||A V - L||_F^2 + lambda0 ||L||_1 + lambda1 Omega(A)`.
//!
//! Coding is the exact proximal step `L = soft(A V, lambda0)`. The transform
//! step minimizes `1/2 ||A V - L||^2 + lambda2' ||A||^2 - lambda4' log|det A A^T|`
//! (`lambda2' = lambda1 lambda2`, `lambda4' = lambda1 lambda4`) block by block
//! over groups of `d` rows. Rows decouple in the fidelity term, so each full
//! `d x d` block has the exact closed-form minimizer
//!
//! ```text
//! V V^T + 2 lambda2' I = C C^T            (Cholesky)
//! C^-1 V L_b^T = Q S R^T                  (SVD)
//! A_b = R G Q^T C^-1,  G = (S + (S^2 + 8 lambda4' I)^(1/2)) / 2
//! ```
//!
//! A trailing partial block (`K mod d` rows) has no closed form; it takes the
//! best of a few closed-form candidates and refines it with backtracking
//! gradient steps, never increasing its block objective.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::inverse::{self, Dictionary, InverseHyperparams, SparseCodes};
use crate::math;
use crate::omega::{log_abs_det, omega, OmegaWeights};
use crate::rng;
use crate::trace::{HalfStep, TraceEntry};
use crate::Matrix;

const PARTIAL_BLOCK_STEPS: usize = 25;
const COHERENCE_LIMIT: f64 = inverse::COHERENCE_LIMIT;

/// `K x d` transform. Rows are stored as the columns of a `d x K` matrix so
/// that each row is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    rows_t: Matrix,
}

impl Transform {
    /// From a `K x d` matrix.
    pub fn new(a: &Matrix) -> Result<Self> {
        Self::from_rows_t(a.transpose())
    }

    /// From a `d x K` matrix whose columns are the rows of `A`.
    pub fn from_rows_t(rows_t: Matrix) -> Result<Self> {
        if rows_t.ncols() == 0 || rows_t.nrows() == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(Self { rows_t })
    }

    #[inline]
    pub fn num_rows(&self) -> usize {
        self.rows_t.ncols()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.rows_t.nrows()
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        let d = self.rows_t.nrows();
        &self.rows_t.as_slice()[k * d..(k + 1) * d]
    }

    pub fn rows_t(&self) -> &Matrix {
        &self.rows_t
    }

    /// `A` as a `K x d` matrix.
    pub fn matrix(&self) -> Matrix {
        self.rows_t.transpose()
    }

    /// Largest over smallest of the `min(K, d)` singular values; infinite
    /// when `A` is rank deficient.
    pub fn condition_number(&self) -> f64 {
        let s = self.rows_t.clone().singular_values();
        let max = s.iter().fold(0.0f64, |a, &b| a.max(b));
        let min = s.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectHyperparams {
    pub num_atoms: usize,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub num_iterations: usize,
}

impl Default for DirectHyperparams {
    fn default() -> Self {
        Self {
            num_atoms: 64,
            lambda0: 0.5,
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 0.0,
            lambda4: 1.0,
            num_iterations: 10,
        }
    }
}

impl DirectHyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 > 0.0) {
            return Err(Error::InvalidConfig("lambda0 must be positive"));
        }
        let lambdas = [self.lambda1, self.lambda2, self.lambda3, self.lambda4];
        if lambdas.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::InvalidConfig("lambda1..lambda4 must be non-negative"));
        }
        if self.num_atoms == 0 {
            return Err(Error::InvalidConfig("number of transform rows must be at least 1"));
        }
        Ok(())
    }

    /// Weight of `||A||_F^2` in the transform step.
    pub fn frobenius_weight(&self) -> f64 {
        self.lambda1 * self.lambda2
    }

    /// Weight of `-log|det A A^T|` in the transform step.
    pub fn logdet_weight(&self) -> f64 {
        self.lambda1 * self.lambda4
    }

    pub fn omega_weights(&self) -> OmegaWeights {
        OmegaWeights {
            lambda2: self.lambda2,
            lambda3: self.lambda3,
            lambda4: self.lambda4,
        }
    }
}

/// `soft(A v, lambda0)`: the exact minimizer of
/// `1/2 ||A v - l||^2 + lambda0 ||l||_1`. Each element costs one length-`d`
/// dot product.
pub fn threshold_code(a: &Transform, v: &[f64], lambda0: f64) -> Result<Vec<f64>> {
    check_dim(a, v)?;
    Ok((0..a.num_rows()).map(|k| code_element(a, v, lambda0, k)).collect())
}

/// Same result as [`threshold_code`], computed element by element in an
/// arbitrary order. Elements share no state, so any schedule (including
/// concurrent ones) produces identical bits.
pub fn threshold_code_in_order(a: &Transform, v: &[f64], lambda0: f64, order: &[usize]) -> Result<Vec<f64>> {
    check_dim(a, v)?;
    let mut out = alloc::vec![0.0; a.num_rows()];
    for &k in order {
        if k >= out.len() {
            return Err(Error::DimensionMismatch {
                expected: out.len(),
                found: k,
            });
        }
        out[k] = code_element(a, v, lambda0, k);
    }
    Ok(out)
}

#[inline]
fn code_element(a: &Transform, v: &[f64], lambda0: f64, k: usize) -> f64 {
    math::soft_threshold(math::dot(a.row(k), v), lambda0)
}

fn check_dim(a: &Transform, v: &[f64]) -> Result<()> {
    if v.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: v.len(),
        });
    }
    Ok(())
}

/// Threshold codes for every column of `volumes` (`d x N`).
pub fn threshold_code_all(a: &Transform, volumes: &Matrix, lambda0: f64) -> Result<SparseCodes> {
    if volumes.nrows() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: volumes.nrows(),
        });
    }
    let k = a.num_rows();
    let cols = map_columns(volumes.ncols(), |j| {
        let v = volumes.column(j);
        let v = v.as_slice();
        (0..k).map(|r| code_element(a, v, lambda0, r)).collect::<Vec<f64>>()
    });
    let mut codes = Matrix::zeros(k, volumes.ncols());
    for (j, c) in cols.into_iter().enumerate() {
        codes.column_mut(j).copy_from_slice(&c);
    }
    Ok(SparseCodes { codes })
}

#[cfg(feature = "parallel")]
fn map_columns<R: Send>(n: usize, f: impl Fn(usize) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_columns<R>(n: usize, f: impl Fn(usize) -> R) -> Vec<R> {
    (0..n).map(f).collect()
}

/// Row ranges `(start, len)` of the transform blocks: full blocks of `d`
/// rows, then one partial block for the remainder.
pub fn block_ranges(num_rows: usize, d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut s = 0;
    while s < num_rows {
        let len = d.min(num_rows - s);
        out.push((s, len));
        s += len;
    }
    out
}

/// Shared per-update quantities.
struct TransformSystem {
    /// `V V^T + 2 lambda2' I`.
    m: Matrix,
    /// Lower Cholesky factor of `m`.
    chol_l: Matrix,
    /// `V L^T`, `d x K`.
    p: Matrix,
    lambda4: f64,
}

impl TransformSystem {
    fn new(volumes: &Matrix, codes: &Matrix, h: &DirectHyperparams) -> Result<Self> {
        let d = volumes.nrows();
        let mut m = volumes * volumes.transpose();
        for i in 0..d {
            m[(i, i)] += 2.0 * h.frobenius_weight();
        }
        let chol = m.clone().cholesky().ok_or(Error::SingularFactor)?;
        let chol_l = chol.l();
        if (0..d).any(|i| !(chol_l[(i, i)] > 0.0)) {
            return Err(Error::SingularFactor);
        }
        Ok(Self {
            m,
            chol_l,
            p: volumes * codes.transpose(),
            lambda4: h.logdet_weight(),
        })
    }

    /// Exact minimizer for a `d x d` block whose `V L_b^T` is `p_block`.
    fn square_block(&self, p_block: &Matrix) -> Result<Matrix> {
        let n = self
            .chol_l
            .solve_lower_triangular(p_block)
            .ok_or(Error::SingularFactor)?;
        let svd = n.svd(true, true);
        let q = svd.u.ok_or(Error::SingularFactor)?;
        let r_t = svd.v_t.ok_or(Error::SingularFactor)?;
        // X = C^-T Q, so Q^T C^-1 = X^T.
        let x = self
            .chol_l
            .transpose()
            .solve_upper_triangular(&q)
            .ok_or(Error::SingularFactor)?;
        let mut r_gamma = r_t.transpose();
        for (i, &s) in svd.singular_values.iter().enumerate() {
            let g = 0.5 * (s + math::sqrt(s * s + 8.0 * self.lambda4));
            for a in r_gamma.column_mut(i).iter_mut() {
                *a *= g;
            }
        }
        Ok(r_gamma * x.transpose())
    }

    /// `lambda4' = 0` minimizer `L_b V^T M^-1` for any block size.
    fn ridge_block(&self, p_block: &Matrix) -> Result<Matrix> {
        let chol = self.m.clone().cholesky().ok_or(Error::SingularFactor)?;
        Ok(chol.solve(p_block).transpose())
    }

    /// `1/2 tr(A M A^T) - tr(A P_b) - lambda4' log det(A A^T)`; equals the
    /// block objective up to the constant `1/2 ||L_b||^2`.
    fn block_value(&self, a: &Matrix, p_block: &Matrix) -> f64 {
        let quad = 0.5 * (a * &self.m).component_mul(a).sum();
        let lin = a.transpose().component_mul(p_block).sum();
        let mut value = quad - lin;
        if self.lambda4 != 0.0 {
            match log_abs_det(a * a.transpose()) {
                Ok(ld) => value -= self.lambda4 * ld,
                Err(_) => return f64::INFINITY,
            }
        }
        value
    }

    fn block_gradient(&self, a: &Matrix, p_block: &Matrix) -> Option<Matrix> {
        let mut g = a * &self.m - p_block.transpose();
        if self.lambda4 != 0.0 {
            let gram = a * a.transpose();
            let inv = gram.try_inverse()?;
            g -= (inv * a) * (2.0 * self.lambda4);
        }
        Some(g)
    }

    /// Best candidate for a partial block, then guarded gradient descent.
    fn partial_block(&self, start: usize, len: usize, current: &Matrix) -> Result<Matrix> {
        let d = self.m.nrows();
        let k = self.p.ncols();
        let p_block = self.p.columns(start, len).into_owned();
        let mut candidates = Vec::new();
        candidates.push(current.clone());
        candidates.push(self.ridge_block(&p_block)?);
        if k >= d {
            // Exact solve over the last d rows, keep the trailing `len`.
            let window = self.square_block(&self.p.columns(k - d, d).into_owned())?;
            candidates.push(window.rows(d - len, len).into_owned());
        } else {
            // Pad with zero code rows to a square block, keep the leading rows.
            let mut padded = Matrix::zeros(d, d);
            padded.columns_mut(0, len).copy_from(&p_block);
            let full = self.square_block(&padded)?;
            candidates.push(full.rows(0, len).into_owned());
        }
        let mut best = candidates.swap_remove(0);
        let mut best_value = self.block_value(&best, &p_block);
        for c in candidates {
            let v = self.block_value(&c, &p_block);
            if v < best_value {
                best = c;
                best_value = v;
            }
        }
        if !best_value.is_finite() {
            return Ok(best);
        }
        let mut step = 1.0 / (self.m.norm() + 1.0);
        for _ in 0..PARTIAL_BLOCK_STEPS {
            let Some(g) = self.block_gradient(&best, &p_block) else { break };
            let gnorm = g.norm_squared();
            if gnorm == 0.0 {
                break;
            }
            let mut accepted = false;
            for _ in 0..30 {
                let trial = &best - &g * step;
                let v = self.block_value(&trial, &p_block);
                if v <= best_value - 0.5 * step * gnorm * 1e-4 {
                    best = trial;
                    best_value = v;
                    accepted = true;
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Ok(best)
    }
}

/// Transform half-step: block-wise minimizer of the transform objective for
/// fixed codes `L` (`K x N`). `current` seeds the partial block.
pub fn update_transform(volumes: &Matrix, codes: &SparseCodes, h: &DirectHyperparams, current: &Transform) -> Result<Transform> {
    let d = volumes.nrows();
    let k = codes.codes.nrows();
    if codes.codes.ncols() != volumes.ncols() {
        return Err(Error::DimensionMismatch {
            expected: volumes.ncols(),
            found: codes.codes.ncols(),
        });
    }
    if current.dim() != d || current.num_rows() != k {
        return Err(Error::DimensionMismatch {
            expected: k * d,
            found: current.num_rows() * current.dim(),
        });
    }
    let sys = TransformSystem::new(volumes, &codes.codes, h)?;
    let mut a = current.matrix();
    for (start, len) in block_ranges(k, d) {
        let block = if len == d {
            sys.square_block(&sys.p.columns(start, d).into_owned())?
        } else {
            sys.partial_block(start, len, &a.rows(start, len).into_owned())?
        };
        a.rows_mut(start, len).copy_from(&block);
    }
    Transform::new(&a)
}

/// Transform-step objective: `1/2 ||A V - L||^2 + lambda2' ||A||^2 -
/// lambda4' sum_b log|det A_b A_b^T|` over the row blocks. Infinite when a
/// block Gram is singular and `lambda4' > 0`.
pub fn transform_objective(a: &Transform, volumes: &Matrix, codes: &Matrix, h: &DirectHyperparams) -> f64 {
    let am = a.matrix();
    let mut value = 0.5 * (&am * volumes - codes).norm_squared() + h.frobenius_weight() * am.norm_squared();
    let lambda4 = h.logdet_weight();
    if lambda4 != 0.0 {
        for (start, len) in block_ranges(a.num_rows(), a.dim()) {
            let b = am.rows(start, len);
            match log_abs_det(b * b.transpose()) {
                Ok(ld) => value -= lambda4 * ld,
                Err(_) => return f64::INFINITY,
            }
        }
    }
    value
}

/// `1/2 ||A V - L||^2 + lambda0 ||L||_1`.
pub fn coding_objective(a: &Transform, volumes: &Matrix, codes: &Matrix, lambda0: f64) -> f64 {
    0.5 * (a.matrix() * volumes - codes).norm_squared() + lambda0 * math::l1(codes.as_slice())
}

/// Coding objective plus `lambda1 * Omega(A)`; `None` when Omega is
/// undefined (e.g. singular `A A^T` for `K > d`).
pub fn full_objective(a: &Transform, volumes: &Matrix, codes: &Matrix, h: &DirectHyperparams) -> Option<f64> {
    let data = coding_objective(a, volumes, codes, h.lambda0);
    if h.lambda1 == 0.0 {
        return Some(data);
    }
    omega(&a.matrix(), h.omega_weights()).ok().map(|o| data + h.lambda1 * o)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectModel {
    pub transform: Transform,
    pub codes: SparseCodes,
    pub trace: Vec<TraceEntry>,
}

/// Alternating transform learning on the columns of `volumes` (`d x N`).
///
/// `A` starts as seeded Gaussian rows scaled to unit norm. Each iteration
/// runs the transform step (plus guarded reseeding of near-duplicate rows)
/// and then the threshold coding step.
pub fn train_direct(volumes: &Matrix, h: &DirectHyperparams, seed: u64) -> Result<DirectModel> {
    h.validate()?;
    let d = volumes.nrows();
    if volumes.ncols() == 0 || d == 0 {
        return Err(Error::EmptyInput);
    }
    let mut rng = rng::seeded(seed);
    let mut rows_t = Matrix::zeros(d, h.num_atoms);
    for mut col in rows_t.column_iter_mut() {
        for a in col.iter_mut() {
            *a = rng::gaussian(&mut rng);
        }
        math::normalize(col.as_mut_slice());
    }
    let mut a = Transform::from_rows_t(rows_t)?;
    let zero = Matrix::zeros(h.num_atoms, volumes.ncols());
    let mut codes = threshold_code_all(&a, volumes, h.lambda0)?;
    let mut trace = Vec::with_capacity(2 * h.num_iterations + 1);
    trace.push(TraceEntry {
        iteration: 0,
        step: HalfStep::Initial,
        before: coding_objective(&a, volumes, &zero, h.lambda0),
        after: coding_objective(&a, volumes, &codes.codes, h.lambda0),
        objective: full_objective(&a, volumes, &codes.codes, h),
    });

    for it in 1..=h.num_iterations {
        let before = transform_objective(&a, volumes, &codes.codes, h);
        a = update_transform(volumes, &codes, h, &a)?;
        let mut after = transform_objective(&a, volumes, &codes.codes, h);
        if h.num_atoms > 1 {
            after = reseed_coherent_rows(&mut a, volumes, &codes.codes, h, before, after, &mut rng);
        }
        trace.push(TraceEntry {
            iteration: it,
            step: HalfStep::BasisUpdate,
            before,
            after,
            objective: full_objective(&a, volumes, &codes.codes, h),
        });

        let before = coding_objective(&a, volumes, &codes.codes, h.lambda0);
        codes = threshold_code_all(&a, volumes, h.lambda0)?;
        trace.push(TraceEntry {
            iteration: it,
            step: HalfStep::Coding,
            before,
            after: coding_objective(&a, volumes, &codes.codes, h.lambda0),
            objective: full_objective(&a, volumes, &codes.codes, h),
        });
    }
    Ok(DirectModel {
        transform: a,
        codes,
        trace,
    })
}

/// Redraws rows nearly parallel to an earlier row as random Gaussian rows of
/// the same norm, keeping each redraw only if the transform objective stays
/// at or below `start`.
fn reseed_coherent_rows(
    a: &mut Transform,
    volumes: &Matrix,
    codes: &Matrix,
    h: &DirectHyperparams,
    start: f64,
    current: f64,
    rng: &mut rng::SeededRng,
) -> f64 {
    let mut value = current;
    let k_count = a.num_rows();
    let norms: Vec<f64> = (0..k_count).map(|k| math::norm(a.row(k))).collect();
    for k in 1..k_count {
        if norms[k] == 0.0 {
            continue;
        }
        let coherent = (0..k).any(|j| {
            norms[j] > 0.0 && math::abs(math::dot(a.row(j), a.row(k))) / (norms[j] * norms[k]) > COHERENCE_LIMIT
        });
        if !coherent {
            continue;
        }
        let mut fresh: Vec<f64> = (0..a.dim()).map(|_| rng::gaussian(rng)).collect();
        math::normalize(&mut fresh);
        for x in fresh.iter_mut() {
            *x *= norms[k];
        }
        let old = a.row(k).to_vec();
        a.rows_t.column_mut(k).copy_from_slice(&fresh);
        let trial = transform_objective(a, volumes, codes, h);
        if trial <= start {
            value = trial;
        } else {
            a.rows_t.column_mut(k).copy_from_slice(&old);
        }
    }
    value
}

/// Maximum absolute difference between LASSO codes under an orthonormal
/// dictionary `D` and threshold codes under `A = D^T`, over `count` seeded
/// Gaussian inputs. The two coincide exactly in exact arithmetic.
pub fn code_consistency_check(d: &Matrix, lambda0: f64, count: usize, seed: u64) -> Result<f64> {
    let n = d.nrows();
    if d.ncols() != n {
        return Err(Error::InvalidConfig("consistency check needs a square basis"));
    }
    let gram = d.transpose() * d;
    if (gram - Matrix::identity(n, n)).abs().max() > 1e-10 {
        return Err(Error::InvalidConfig("consistency check needs orthonormal columns"));
    }
    let dict = Dictionary::from_columns(d.clone())?;
    let transform = Transform::from_rows_t(d.clone())?;
    let h = InverseHyperparams {
        num_atoms: n,
        lambda0,
        tolerance: 1e-14,
        max_sweeps: 100,
        ..Default::default()
    };
    let mut rng = rng::seeded(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let v: Vec<f64> = (0..n).map(|_| rng::gaussian(&mut rng)).collect();
        let lasso = inverse::lasso_code(&dict, &v, &h)?;
        let thresh = threshold_code(&transform, &v, lambda0)?;
        for (x, y) in lasso.iter().zip(&thresh) {
            worst = worst.max(math::abs(x - y));
        }
    }
    Ok(worst)
}
