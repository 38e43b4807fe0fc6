//! One-vs-rest linear SVM with the squared hinge loss.
//!
//! Each class solves
//! `min_{w,b} 1/2 ||w||^2 + C sum_i max(0, 1 - y_i (w.x_i + b))^2`
//! on standardized features with a full-batch L-BFGS and backtracking
//! (Armijo) line search. The objective is convex and once differentiable,
//! and the solver is deterministic.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::math;
use crate::rng;

pub const GRADIENT_TOL: f64 = 1e-5;
pub const MAX_ITERATIONS: usize = 10_000;
const HISTORY: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel {
    /// Class labels in score order.
    pub classes: Vec<u32>,
    /// `classes.len() x dim`, row-major, in standardized units.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub reg_c: f64,
    /// Per-dimension training mean and scale.
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl LinearSvmModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Class scores `w_c . standardize(x) + b_c`.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.len(),
            });
        }
        let z = standardize(x, &self.mean, &self.scale);
        Ok(self
            .weights
            .chunks_exact(d)
            .zip(&self.bias)
            .map(|(w, b)| math::dot(w, &z) + b)
            .collect())
    }
}

/// Label with the highest score; ties go to the earlier class.
pub fn predict(model: &LinearSvmModel, x: &[f64]) -> Result<u32> {
    let scores = model.scores(x)?;
    let mut best = 0;
    for (c, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = c;
        }
    }
    Ok(model.classes[best])
}

pub fn predict_batch(model: &LinearSvmModel, xs: &[FeatureVector]) -> Result<Vec<u32>> {
    xs.iter().map(|f| predict(model, &f.data)).collect()
}

fn standardize(x: &[f64], mean: &[f64], scale: &[f64]) -> Vec<f64> {
    x.iter().zip(mean).zip(scale).map(|((v, m), s)| (v - m) / s).collect()
}

fn labels_of(data: &[FeatureVector]) -> Result<Vec<u32>> {
    data.iter().map(|f| f.label.ok_or(Error::DegenerateLabels)).collect()
}

/// Trains one binary problem per class. Needs at least two classes.
pub fn train_svm(data: &[FeatureVector], reg_c: f64) -> Result<LinearSvmModel> {
    if !(reg_c > 0.0) {
        return Err(Error::InvalidConfig("SVM regularization must be positive"));
    }
    let labels = labels_of(data)?;
    let classes: Vec<u32> = labels.iter().copied().collect::<alloc::collections::BTreeSet<_>>().into_iter().collect();
    if classes.len() < 2 {
        return Err(Error::DegenerateLabels);
    }
    let d = data[0].data.len();
    if let Some(bad) = data.iter().find(|f| f.data.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.data.len(),
        });
    }
    let n = data.len() as f64;
    let mut mean = alloc::vec![0.0; d];
    for f in data {
        for (m, v) in mean.iter_mut().zip(&f.data) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut scale = alloc::vec![0.0; d];
    for f in data {
        for ((s, v), m) in scale.iter_mut().zip(&f.data).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in scale.iter_mut() {
        let sd = math::sqrt(*s / n);
        *s = if sd > 0.0 { sd } else { 1.0 };
    }
    let mut rows = Vec::with_capacity(data.len() * d);
    for f in data {
        rows.extend(standardize(&f.data, &mean, &scale));
    }
    let problem = |c: &u32| {
        let y: Vec<f64> = labels.iter().map(|l| if l == c { 1.0 } else { -1.0 }).collect();
        solve_binary(&rows, d, &y, reg_c)
    };
    let solutions = map_classes(&classes, problem);
    let mut weights = Vec::with_capacity(classes.len() * d);
    let mut bias = Vec::with_capacity(classes.len());
    for (w, b) in solutions {
        weights.extend(w);
        bias.push(b);
    }
    Ok(LinearSvmModel {
        classes,
        weights,
        bias,
        reg_c,
        mean,
        scale,
    })
}

#[cfg(feature = "parallel")]
fn map_classes<R: Send>(classes: &[u32], f: impl Fn(&u32) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    classes.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_classes<R>(classes: &[u32], f: impl Fn(&u32) -> R) -> Vec<R> {
    classes.iter().map(f).collect()
}

/// `1/2 ||w||^2 + C sum max(0, 1 - y_i (w.x_i + b))^2` over row-major
/// `rows` of width `dim`.
pub fn binary_objective(rows: &[f64], dim: usize, y: &[f64], w: &[f64], b: f64, c: f64) -> f64 {
    let mut loss = 0.0;
    for (x, yi) in rows.chunks_exact(dim).zip(y) {
        let m = 1.0 - yi * (math::dot(w, x) + b);
        if m > 0.0 {
            loss += m * m;
        }
    }
    0.5 * math::norm_sq(w) + c * loss
}

/// Objective and gradient; the parameter vector is `[w, b]`.
fn objective_and_gradient(rows: &[f64], dim: usize, y: &[f64], theta: &[f64], c: f64, grad: &mut [f64]) -> f64 {
    let (w, b) = (&theta[..dim], theta[dim]);
    grad[..dim].copy_from_slice(w);
    grad[dim] = 0.0;
    let mut loss = 0.0;
    for (x, yi) in rows.chunks_exact(dim).zip(y) {
        let m = 1.0 - yi * (math::dot(w, x) + b);
        if m > 0.0 {
            loss += m * m;
            let coef = -2.0 * c * yi * m;
            math::axpy(coef, x, &mut grad[..dim]);
            grad[dim] += coef;
        }
    }
    0.5 * math::norm_sq(w) + c * loss
}

/// L-BFGS from zero until the gradient norm drops below [`GRADIENT_TOL`],
/// the line search stalls, or [`MAX_ITERATIONS`].
pub fn solve_binary(rows: &[f64], dim: usize, y: &[f64], c: f64) -> (Vec<f64>, f64) {
    let n = dim + 1;
    let mut theta = alloc::vec![0.0; n];
    let mut grad = alloc::vec![0.0; n];
    let mut f = objective_and_gradient(rows, dim, y, &theta, c, &mut grad);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut trial = alloc::vec![0.0; n];
    let mut trial_grad = alloc::vec![0.0; n];

    for _ in 0..MAX_ITERATIONS {
        if math::norm(&grad) < GRADIENT_TOL {
            break;
        }
        let mut dir = two_loop(&grad, &s_hist, &y_hist);
        let mut slope = math::dot(&grad, &dir);
        if !(slope < 0.0) {
            // Not a descent direction; fall back to steepest descent.
            dir = grad.iter().map(|g| -g).collect();
            slope = -math::norm_sq(&grad);
            s_hist.clear();
            y_hist.clear();
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            for i in 0..n {
                trial[i] = theta[i] + step * dir[i];
            }
            let ft = objective_and_gradient(rows, dim, y, &trial, c, &mut trial_grad);
            if ft <= f + 1e-4 * step * slope {
                accepted = Some(ft);
                break;
            }
            step *= 0.5;
        }
        let Some(ft) = accepted else {
            break;
        };
        let s: Vec<f64> = trial.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = trial_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        if math::dot(&s, &yv) > 1e-12 * math::norm(&s) * math::norm(&yv) {
            if s_hist.len() == HISTORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(yv);
        }
        let stalled = f - ft <= 1e-15 * f.abs().max(1.0);
        core::mem::swap(&mut theta, &mut trial);
        core::mem::swap(&mut grad, &mut trial_grad);
        f = ft;
        if stalled && math::norm(&grad) < 1e3 * GRADIENT_TOL {
            break;
        }
    }
    let b = theta[dim];
    theta.truncate(dim);
    (theta, b)
}

fn two_loop(grad: &[f64], s_hist: &[Vec<f64>], y_hist: &[Vec<f64>]) -> Vec<f64> {
    let mut q: Vec<f64> = grad.to_vec();
    let m = s_hist.len();
    let mut alpha = alloc::vec![0.0; m];
    for i in (0..m).rev() {
        let rho = 1.0 / math::dot(&y_hist[i], &s_hist[i]);
        alpha[i] = rho * math::dot(&s_hist[i], &q);
        math::axpy(-alpha[i], &y_hist[i], &mut q);
    }
    let gamma = match m {
        0 => 1.0 / math::norm(grad).max(1.0),
        _ => math::dot(&s_hist[m - 1], &y_hist[m - 1]) / math::norm_sq(&y_hist[m - 1]),
    };
    for v in q.iter_mut() {
        *v *= gamma;
    }
    for i in 0..m {
        let rho = 1.0 / math::dot(&y_hist[i], &s_hist[i]);
        let beta = rho * math::dot(&y_hist[i], &q);
        math::axpy(alpha[i] - beta, &s_hist[i], &mut q);
    }
    for v in q.iter_mut() {
        *v = -*v;
    }
    q
}

/// Stratified fold index per example: each class is shuffled with the seed
/// and dealt round-robin, starting where the previous class stopped.
pub fn fold_assignment(labels: &[u32], folds: usize, seed: u64) -> Vec<usize> {
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = rng::seeded(seed);
    let mut out = alloc::vec![0; labels.len()];
    let mut next = 0;
    for (_, mut idx) in by_class {
        rng::shuffle(&mut rng, &mut idx);
        for i in idx {
            out[i] = next % folds;
            next += 1;
        }
    }
    out
}

/// Mean validation accuracy of `reg_c` over the given fold assignment.
pub fn fold_accuracy(data: &[FeatureVector], assignment: &[usize], folds: usize, reg_c: f64) -> Result<f64> {
    let labels = labels_of(data)?;
    let mut total = 0.0;
    for fold in 0..folds {
        let train: Vec<FeatureVector> = data
            .iter()
            .zip(assignment)
            .filter(|(_, &a)| a != fold)
            .map(|(f, _)| f.clone())
            .collect();
        let model = train_svm(&train, reg_c)?;
        let mut hits = 0usize;
        let mut count = 0usize;
        for ((f, &a), &l) in data.iter().zip(assignment).zip(&labels) {
            if a == fold {
                count += 1;
                if predict(&model, &f.data)? == l {
                    hits += 1;
                }
            }
        }
        if count > 0 {
            total += hits as f64 / count as f64;
        }
    }
    Ok(total / folds as f64)
}

/// Regularization constant with the best mean stratified k-fold accuracy;
/// ties go to the smaller constant.
pub fn cross_validate(data: &[FeatureVector], grid: &[f64], folds: usize, seed: u64) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("regularization grid is empty"));
    }
    if folds < 2 {
        return Err(Error::InvalidConfig("cross-validation needs at least 2 folds"));
    }
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    if data.len() < folds {
        return Err(Error::TooFewExamples {
            examples: data.len(),
            folds,
        });
    }
    let labels = labels_of(data)?;
    let assignment = fold_assignment(&labels, folds, seed);
    let mut sorted: Vec<f64> = grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let mut best = (sorted[0], f64::NEG_INFINITY);
    for &c in &sorted {
        let acc = fold_accuracy(data, &assignment, folds, c)?;
        if acc > best.1 {
            best = (c, acc);
        }
    }
    Ok(best.0)
}
