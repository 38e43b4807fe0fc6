//! Scalar and slice helpers shared by the solvers.
//!
//! Every reduction here runs in a fixed order so results are reproducible
//! regardless of how callers schedule the work.

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

/// `sign(z) * max(|z| - threshold, 0)`.
#[inline]
pub fn soft_threshold(z: f64, threshold: f64) -> f64 {
    if z > threshold {
        z - threshold
    } else if z < -threshold {
        z + threshold
    } else {
        0.0
    }
}

/// Dot product with four interleaved partial sums, combined as
/// `(s0 + s1) + (s2 + s3)` and then the tail left to right.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut s = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ta, tb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        s[0] += x[0] * y[0];
        s[1] += x[1] * y[1];
        s[2] += x[2] * y[2];
        s[3] += x[3] * y[3];
    }
    let mut acc = (s[0] + s[1]) + (s[2] + s[3]);
    for (x, y) in ta.iter().zip(tb) {
        acc += x * y;
    }
    acc
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    sqrt(norm_sq(a))
}

#[inline]
pub fn l1(a: &[f64]) -> f64 {
    a.iter().map(|v| abs(*v)).sum()
}

/// `y += alpha * x`.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Scales `a` to unit norm in place and returns the original norm. A zero
/// vector is left untouched.
pub fn normalize(a: &mut [f64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        for v in a.iter_mut() {
            *v /= n;
        }
    }
    n
}

/// Sums equal-length vectors by a balanced pairwise tree over the given
/// order. Returns a zero vector of length `len` when `parts` is empty.
pub fn pairwise_sum(parts: &[&[f64]], len: usize) -> alloc::vec::Vec<f64> {
    match parts.len() {
        0 => alloc::vec![0.0; len],
        1 => parts[0].to_vec(),
        n => {
            let (lo, hi) = parts.split_at(n / 2);
            let mut left = pairwise_sum(lo, len);
            let right = pairwise_sum(hi, len);
            for (l, r) in left.iter_mut().zip(&right) {
                *l += r;
            }
            left
        }
    }
}

/// Pairwise-tree reduction of owned matrices (same shape); `None` if empty.
pub fn pairwise_reduce(mut parts: alloc::vec::Vec<crate::Matrix>) -> Option<crate::Matrix> {
    while parts.len() > 1 {
        let mut next = alloc::vec::Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a + b),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(1.5, 1.0), 0.5);
        assert_eq!(soft_threshold(-0.3, 1.0), 0.0);
        assert_eq!(soft_threshold(-2.0, 0.5), -1.5);
        assert_eq!(soft_threshold(0.7, 0.0), 0.7);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let rows: alloc::vec::Vec<alloc::vec::Vec<f64>> =
            (0..7).map(|i| alloc::vec![i as f64, 2.0 * i as f64]).collect();
        let refs: alloc::vec::Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        assert_eq!(pairwise_sum(&refs, 2), alloc::vec![21.0, 42.0]);
        assert_eq!(pairwise_sum(&[], 3), alloc::vec![0.0; 3]);
    }
}
