//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use eventfeat_core::rng::{self, SeededRng};
use eventfeat_core::Matrix;

pub fn gaussian_matrix(rng: &mut SeededRng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng::gaussian(rng))
}

pub fn uniform(rng: &mut SeededRng, lo: f64, hi: f64) -> f64 {
    use rand::Rng;
    rng.random_range(lo..hi)
}

/// Orthonormal `n x n` matrix from Gram-Schmidt on Gaussian columns.
pub fn random_orthonormal(rng: &mut SeededRng, n: usize) -> Matrix {
    let g = gaussian_matrix(rng, n, n);
    let mut q = Matrix::zeros(n, n);
    for j in 0..n {
        let mut v = g.column(j).into_owned();
        // Two passes keep the result orthonormal to ~1e-15.
        for _ in 0..2 {
            for i in 0..j {
                let qi = q.column(i);
                let proj = qi.dot(&v);
                v -= qi * proj;
            }
        }
        let nrm = v.norm();
        q.set_column(j, &(v / nrm));
    }
    q
}

/// Cyclic Jacobi eigensolver for a symmetric matrix. Returns eigenvalues and
/// eigenvectors as columns.
pub fn jacobi_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = Matrix::identity(n, n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

/// Determinant by cofactor expansion along the first row.
pub fn cofactor_det(m: &Matrix) -> f64 {
    let n = m.nrows();
    if n == 1 {
        return m[(0, 0)];
    }
    let mut det = 0.0;
    for j in 0..n {
        let minor = m.clone().remove_row(0).remove_column(j);
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        det += sign * m[(0, j)] * cofactor_det(&minor);
    }
    det
}

/// Solves a small dense system by Gaussian elimination with partial
/// pivoting; `None` if singular.
pub fn gauss_solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[(i, col)].abs().partial_cmp(&m[(j, col)].abs()).unwrap())?;
        if m[(piv, col)].abs() < 1e-14 {
            return None;
        }
        m.swap_rows(col, piv);
        x.swap(col, piv);
        for r in col + 1..n {
            let f = m[(r, col)] / m[(col, col)];
            for c in col..n {
                m[(r, c)] -= f * m[(col, c)];
            }
            x[r] -= f * x[col];
        }
    }
    for r in (0..n).rev() {
        let mut s = x[r];
        for c in r + 1..n {
            s -= m[(r, c)] * x[c];
        }
        x[r] = s / m[(r, r)];
    }
    Some(x)
}

pub fn lasso_objective(d: &Matrix, v: &[f64], l: &[f64], lambda0: f64) -> f64 {
    let r: Vec<f64> = (0..d.nrows())
        .map(|i| v[i] - (0..d.ncols()).map(|k| d[(i, k)] * l[k]).sum::<f64>())
        .collect();
    0.5 * r.iter().map(|x| x * x).sum::<f64>() + lambda0 * l.iter().map(|x| x.abs()).sum::<f64>()
}

/// Exhaustive LASSO oracle over supports of size `<= max_support`: on each
/// support and sign pattern solve the stationarity system
/// `D_S^T D_S l_S = D_S^T v - lambda0 s`, keep solutions whose signs agree,
/// and return the smallest objective with its support size.
pub fn support_enumeration(d: &Matrix, v: &[f64], lambda0: f64, max_support: usize) -> (f64, usize) {
    let k = d.ncols();
    let mut best = (lasso_objective(d, v, &vec![0.0; k], lambda0), 0);
    let mut support = Vec::new();
    enumerate(d, v, lambda0, max_support, 0, &mut support, &mut best);
    best
}

fn enumerate(d: &Matrix, v: &[f64], lambda0: f64, max: usize, start: usize, s: &mut Vec<usize>, best: &mut (f64, usize)) {
    if !s.is_empty() {
        let m = s.len();
        for pattern in 0..(1u32 << m) {
            let signs: Vec<f64> = (0..m).map(|i| if pattern >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let gram = Matrix::from_fn(m, m, |a, b| d.column(s[a]).dot(&d.column(s[b])));
            let rhs: Vec<f64> = (0..m)
                .map(|a| (0..d.nrows()).map(|i| d[(i, s[a])] * v[i]).sum::<f64>() - lambda0 * signs[a])
                .collect();
            if let Some(ls) = gauss_solve(&gram, &rhs) {
                if ls.iter().zip(&signs).all(|(x, sg)| x * sg > 0.0) {
                    let mut l = vec![0.0; d.ncols()];
                    for (a, &j) in s.iter().enumerate() {
                        l[j] = ls[a];
                    }
                    let obj = lasso_objective(d, v, &l, lambda0);
                    if obj < best.0 {
                        *best = (obj, m);
                    }
                }
            }
        }
    }
    if s.len() == max {
        return;
    }
    for j in start..d.ncols() {
        s.push(j);
        enumerate(d, v, lambda0, max, j + 1, s, best);
        s.pop();
    }
}
