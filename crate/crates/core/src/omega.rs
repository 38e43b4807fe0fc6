//! Conditioning/coherence regularizer shared by both formulations:
//!
//! `lambda2 ||M||_F^2 - lambda3 ||G - I||_F^2 - lambda4 log|det G|`, `G = M M^T`.
//!
//! For a dictionary `M = D` (d x K) the Gram is `D D^T`; for a transform
//! `M = A` (K x d) it is `A A^T`. Norms are read as Frobenius norms.

use crate::error::{Error, Result};
use crate::math;
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaWeights {
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
}

/// Evaluates the regularizer on `m`. The log-determinant is skipped when
/// `lambda4 == 0`; otherwise a singular Gram is an error.
pub fn omega(m: &Matrix, w: OmegaWeights) -> Result<f64> {
    let frob = m.norm_squared();
    let mut value = w.lambda2 * frob;
    if w.lambda3 == 0.0 && w.lambda4 == 0.0 {
        return Ok(value);
    }
    let gram = m * m.transpose();
    if w.lambda3 != 0.0 {
        let mut dev = gram.clone();
        for i in 0..dev.nrows() {
            dev[(i, i)] -= 1.0;
        }
        value -= w.lambda3 * dev.norm_squared();
    }
    if w.lambda4 != 0.0 {
        value -= w.lambda4 * log_abs_det(gram)?;
    }
    Ok(value)
}

/// `log |det g|` through an LU factorization.
pub fn log_abs_det(g: Matrix) -> Result<f64> {
    let n = g.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let lu = g.lu();
    let u = lu.u();
    let mut acc = 0.0;
    for i in 0..n {
        let p = math::abs(u[(i, i)]);
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::SingularGram);
        }
        acc += math::ln(p);
    }
    Ok(acc)
}
