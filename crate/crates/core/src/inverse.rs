//! Dictionary learning: `min 1/2 ||V - D L||_F^2 + lambda0 ||L||_1 + lambda1 Omega(D)`.
//!
//! Coding is cyclic coordinate descent on the LASSO; the dictionary step is
//! a K-SVD sweep. Training alternates the two. Omega enters only through
//! unit-norm atoms and a guarded reseed of near-duplicate atoms; its value
//! is reported in the trace.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::omega::{omega, OmegaWeights};
use crate::rng;
use crate::trace::{HalfStep, TraceEntry};
use crate::Matrix;

const NORM_TOL: f64 = 1e-8;
const POWER_MAX_ITERS: usize = 50;
const POWER_TOL: f64 = 1e-10;
/// Atoms with |cos| above this against an earlier atom get reseeded.
pub const COHERENCE_LIMIT: f64 = 0.99;

/// `d x K`, unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: Matrix,
}

impl Dictionary {
    /// Wraps `atoms`, requiring unit-norm columns.
    pub fn new(atoms: Matrix) -> Result<Self> {
        check_unit_columns(&atoms)?;
        Ok(Self { atoms })
    }

    /// Normalizes every column; fails on an all-zero column.
    pub fn from_columns(mut atoms: Matrix) -> Result<Self> {
        for (k, mut col) in atoms.column_iter_mut().enumerate() {
            if math::normalize(col.as_mut_slice()) == 0.0 {
                return Err(Error::NotNormalized { atom: k });
            }
        }
        Ok(Self { atoms })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    #[inline]
    pub fn num_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    #[inline]
    pub fn atom(&self, k: usize) -> &[f64] {
        let d = self.atoms.nrows();
        &self.atoms.as_slice()[k * d..(k + 1) * d]
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix {
        &self.atoms
    }

    pub fn into_matrix(self) -> Matrix {
        self.atoms
    }
}

fn check_unit_columns(atoms: &Matrix) -> Result<()> {
    for k in 0..atoms.ncols() {
        if math::abs(math::norm(atoms.column(k).as_slice()) - 1.0) > NORM_TOL {
            return Err(Error::NotNormalized { atom: k });
        }
    }
    Ok(())
}

/// `K x N` codes, one column per coded volume.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCodes {
    pub codes: Matrix,
}

impl SparseCodes {
    pub fn support_sizes(&self) -> Vec<usize> {
        self.codes
            .column_iter()
            .map(|c| c.iter().filter(|&&v| v != 0.0).count())
            .collect()
    }

    pub fn l1(&self) -> f64 {
        math::l1(self.codes.as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseHyperparams {
    pub num_atoms: usize,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub num_iterations: usize,
    /// Coordinate descent stops once a sweep moves the code by less than
    /// this in total L1 distance.
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub target_sparsity: Option<usize>,
}

impl Default for InverseHyperparams {
    fn default() -> Self {
        Self {
            num_atoms: 64,
            lambda0: 1.0,
            lambda1: 1.0,
            lambda2: 0.0,
            lambda3: 0.0,
            lambda4: 0.0,
            num_iterations: 10,
            tolerance: 1e-6,
            max_sweeps: 1000,
            target_sparsity: None,
        }
    }
}

impl InverseHyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 > 0.0) {
            return Err(Error::InvalidConfig("lambda0 must be positive"));
        }
        let lambdas = [self.lambda1, self.lambda2, self.lambda3, self.lambda4];
        if lambdas.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::InvalidConfig("lambda1..lambda4 must be non-negative"));
        }
        if self.num_atoms == 0 {
            return Err(Error::InvalidConfig("number of atoms must be at least 1"));
        }
        if !(self.tolerance > 0.0) || self.max_sweeps == 0 {
            return Err(Error::InvalidConfig("lasso tolerance and sweep cap must be positive"));
        }
        Ok(())
    }

    pub fn omega_weights(&self) -> OmegaWeights {
        OmegaWeights {
            lambda2: self.lambda2,
            lambda3: self.lambda3,
            lambda4: self.lambda4,
        }
    }
}

/// LASSO code of `v`: approximately `argmin 1/2 ||v - D l||^2 + lambda0 ||l||_1`.
pub fn lasso_code(dict: &Dictionary, v: &[f64], h: &InverseHyperparams) -> Result<Vec<f64>> {
    check_unit_columns(&dict.atoms)?;
    if v.len() != dict.dim() {
        return Err(Error::DimensionMismatch {
            expected: dict.dim(),
            found: v.len(),
        });
    }
    let mut l = alloc::vec![0.0; dict.num_atoms()];
    coordinate_descent(&dict.atoms, v, h.lambda0, h.tolerance, h.max_sweeps, &mut l);
    if let Some(s) = h.target_sparsity {
        truncate_support(&mut l, s);
    }
    Ok(l)
}

/// Cyclic coordinate descent from the warm start in `l`. Every coordinate
/// step is an exact minimization, so the objective never increases.
///
/// Stopping on the summed (not maximal) coordinate change bounds the final
/// subgradient violation of every coordinate by `tol`.
pub fn coordinate_descent(atoms: &Matrix, v: &[f64], lambda0: f64, tol: f64, max_sweeps: usize, l: &mut [f64]) -> usize {
    let k_count = atoms.ncols();
    let mut r = v.to_vec();
    for (k, &lk) in l.iter().enumerate() {
        if lk != 0.0 {
            math::axpy(-lk, atoms.column(k).as_slice(), &mut r);
        }
    }
    let norms: Vec<f64> = (0..k_count).map(|k| math::norm_sq(atoms.column(k).as_slice())).collect();
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut moved = 0.0;
        for k in 0..k_count {
            let nk = norms[k];
            if nk == 0.0 {
                continue;
            }
            let a = atoms.column(k);
            let a = a.as_slice();
            let old = l[k];
            let z = math::dot(a, &r) + nk * old;
            let new = math::soft_threshold(z, lambda0) / nk;
            if new != old {
                math::axpy(old - new, a, &mut r);
                moved += math::abs(new - old);
                l[k] = new;
            }
        }
        if moved < tol {
            break;
        }
    }
    sweeps
}

/// Keeps the `s` largest magnitudes (ties to the lower index).
pub fn truncate_support(l: &mut [f64], s: usize) {
    let nonzero = l.iter().filter(|&&v| v != 0.0).count();
    if nonzero <= s {
        return;
    }
    let mut order: Vec<usize> = (0..l.len()).collect();
    order.sort_by(|&a, &b| {
        math::abs(l[b])
            .partial_cmp(&math::abs(l[a]))
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    for &k in &order[s..] {
        l[k] = 0.0;
    }
}

/// LASSO codes for every column of `volumes` (`d x N`), optionally warm
/// started from `warm` (`K x N`).
pub fn sparse_code_all(dict: &Dictionary, volumes: &Matrix, h: &InverseHyperparams, warm: Option<&Matrix>) -> Result<SparseCodes> {
    check_unit_columns(&dict.atoms)?;
    if volumes.nrows() != dict.dim() {
        return Err(Error::DimensionMismatch {
            expected: dict.dim(),
            found: volumes.nrows(),
        });
    }
    let k = dict.num_atoms();
    if let Some(w) = warm {
        if w.nrows() != k || w.ncols() != volumes.ncols() {
            return Err(Error::DimensionMismatch {
                expected: k * volumes.ncols(),
                found: w.nrows() * w.ncols(),
            });
        }
    }
    let code_one = |j: usize| -> Vec<f64> {
        let mut l = match warm {
            Some(w) => w.column(j).as_slice().to_vec(),
            None => alloc::vec![0.0; k],
        };
        coordinate_descent(&dict.atoms, volumes.column(j).as_slice(), h.lambda0, h.tolerance, h.max_sweeps, &mut l);
        if let Some(s) = h.target_sparsity {
            truncate_support(&mut l, s);
        }
        l
    };
    let columns = map_columns(volumes.ncols(), code_one);
    let mut codes = Matrix::zeros(k, volumes.ncols());
    for (j, col) in columns.into_iter().enumerate() {
        codes.column_mut(j).copy_from_slice(&col);
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

#[derive(Debug, Clone, PartialEq)]
pub struct KsvdOutput {
    pub dictionary: Dictionary,
    pub codes: SparseCodes,
}

/// One K-SVD sweep: every used atom and its code row become the dominant
/// singular pair of the residual restricted to the columns that use it.
/// Unused atoms are reseeded from the worst-reconstructed data columns.
/// `1/2 ||V - D L||_F^2` never increases.
pub fn ksvd_update(dict: &Dictionary, volumes: &Matrix, codes: &SparseCodes) -> Result<KsvdOutput> {
    ksvd_update_penalized(dict, volumes, codes, 0.0)
}

/// K-SVD sweep for `1/2 ||V - D L||^2 + lambda0 ||L||_1`: the atom is the
/// dominant left singular vector of the restricted residual and the code row
/// its soft-thresholded projection. With `lambda0 = 0` this is the classic
/// update (row = sigma * right singular vector). Each atom step keeps the
/// better of the new and the current pair, so the objective never
/// increases.
pub fn ksvd_update_penalized(dict: &Dictionary, volumes: &Matrix, codes: &SparseCodes, lambda0: f64) -> Result<KsvdOutput> {
    let (d, k_count) = (dict.dim(), dict.num_atoms());
    if volumes.nrows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: volumes.nrows(),
        });
    }
    if codes.codes.nrows() != k_count || codes.codes.ncols() != volumes.ncols() {
        return Err(Error::DimensionMismatch {
            expected: k_count * volumes.ncols(),
            found: codes.codes.nrows() * codes.codes.ncols(),
        });
    }
    let mut atoms = dict.atoms.clone();
    let mut l = codes.codes.clone();
    let mut residual = volumes - &atoms * &l;
    let mut unused = Vec::new();

    for k in 0..k_count {
        let support: Vec<usize> = (0..l.ncols()).filter(|&j| l[(k, j)] != 0.0).collect();
        if support.is_empty() {
            unused.push(k);
            continue;
        }
        let d_old: Vec<f64> = atoms.column(k).as_slice().to_vec();
        let x_old: Vec<f64> = support.iter().map(|&j| l[(k, j)]).collect();
        // Restricted residual with atom k's contribution added back.
        let mut e = Matrix::zeros(d, support.len());
        for (c, &j) in support.iter().enumerate() {
            let col = &mut e.as_mut_slice()[c * d..(c + 1) * d];
            col.copy_from_slice(residual.column(j).as_slice());
            math::axpy(x_old[c], &d_old, col);
        }
        let current = rank_one_value(&e, &d_old, &x_old, lambda0);

        let u = dominant_left_vector(&e, &d_old);
        let mut best = (d_old.clone(), x_old.clone(), current);
        let candidates = if lambda0 > 0.0 { [Some(u), Some(d_old.clone())] } else { [Some(u), None] };
        for cand in candidates.into_iter().flatten() {
            let x: Vec<f64> = (0..support.len())
                .map(|c| math::soft_threshold(math::dot(e.column(c).as_slice(), &cand), lambda0))
                .collect();
            let value = rank_one_value(&e, &cand, &x, lambda0);
            if value < best.2 {
                best = (cand, x, value);
            }
        }
        let (atom, x, _) = best;
        atoms.column_mut(k).copy_from_slice(&atom);
        for (c, &j) in support.iter().enumerate() {
            l[(k, j)] = x[c];
            let mut col = residual.column_mut(j);
            let col = col.as_mut_slice();
            col.copy_from_slice(e.column(c).as_slice());
            math::axpy(-x[c], &atom, col);
        }
    }

    // An all-zero code row contributes nothing, so reseeding is free.
    if !unused.is_empty() {
        let worst = worst_columns(&residual, volumes);
        let mut next = worst.into_iter();
        for k in unused {
            if let Some(j) = next.next() {
                let mut col = volumes.column(j).as_slice().to_vec();
                math::normalize(&mut col);
                atoms.column_mut(k).copy_from_slice(&col);
            }
        }
    }
    Ok(KsvdOutput {
        dictionary: Dictionary { atoms },
        codes: SparseCodes { codes: l },
    })
}

/// Column indices with a non-zero data column, by residual norm descending
/// (ties to the lower index).
fn worst_columns(residual: &Matrix, volumes: &Matrix) -> Vec<usize> {
    let norms: Vec<f64> = residual.column_iter().map(|c| c.norm_squared()).collect();
    let mut idx: Vec<usize> = (0..residual.ncols())
        .filter(|&j| volumes.column(j).iter().any(|&v| v != 0.0))
        .collect();
    idx.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b)));
    idx
}

/// `1/2 ||E - u x^T||_F^2 + lambda0 ||x||_1`.
fn rank_one_value(e: &Matrix, u: &[f64], x: &[f64], lambda0: f64) -> f64 {
    let mut acc = 0.0;
    for (c, &xc) in x.iter().enumerate() {
        for (ei, ui) in e.column(c).iter().zip(u) {
            let r = ei - ui * xc;
            acc += r * r;
        }
    }
    0.5 * acc + lambda0 * math::l1(x)
}

/// Power iteration on `E E^T` started from `start`. The Rayleigh quotient is
/// non-decreasing along the iteration, so the result is never worse than the
/// start for the unpenalized rank-1 fit.
fn dominant_left_vector(e: &Matrix, start: &[f64]) -> Vec<f64> {
    let mut u = start.to_vec();
    if math::normalize(&mut u) == 0.0 {
        u = alloc::vec![0.0; e.nrows()];
        u[0] = 1.0;
    }
    for _ in 0..POWER_MAX_ITERS {
        let proj: Vec<f64> = e.column_iter().map(|c| math::dot(c.as_slice(), &u)).collect();
        let mut w = alloc::vec![0.0; e.nrows()];
        for (c, &p) in proj.iter().enumerate() {
            math::axpy(p, e.column(c).as_slice(), &mut w);
        }
        if math::normalize(&mut w) == 0.0 {
            return u;
        }
        let delta: f64 = w.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum();
        u = w;
        if delta < POWER_TOL * POWER_TOL {
            break;
        }
    }
    u
}

/// `1/2 ||V - D L||_F^2 + lambda0 ||L||_1`.
pub fn data_objective(dict: &Matrix, volumes: &Matrix, codes: &Matrix, lambda0: f64) -> f64 {
    0.5 * (volumes - dict * codes).norm_squared() + lambda0 * math::l1(codes.as_slice())
}

/// Data objective plus `lambda1 * Omega(D)`; `None` if Omega is undefined.
pub fn full_objective(dict: &Matrix, volumes: &Matrix, codes: &Matrix, h: &InverseHyperparams) -> Option<f64> {
    let data = data_objective(dict, volumes, codes, h.lambda0);
    if h.lambda1 == 0.0 {
        return Some(data);
    }
    omega(dict, h.omega_weights()).ok().map(|o| data + h.lambda1 * o)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseModel {
    pub dictionary: Dictionary,
    pub codes: SparseCodes,
    pub trace: Vec<TraceEntry>,
}

/// Alternating dictionary learning on the columns of `volumes` (`d x N`).
///
/// The dictionary starts as `K` distinct random non-zero data columns. Each
/// iteration runs a penalized K-SVD sweep followed by warm-started LASSO
/// coding; both half-steps are non-increasing in the data objective.
pub fn train_inverse(volumes: &Matrix, h: &InverseHyperparams, seed: u64) -> Result<InverseModel> {
    h.validate()?;
    let n = volumes.ncols();
    let k_count = h.num_atoms;
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut rng = rng::seeded(seed);
    let mut order: Vec<usize> = (0..n).collect();
    rng::shuffle(&mut rng, &mut order);
    let chosen: Vec<usize> = order
        .into_iter()
        .filter(|&j| volumes.column(j).iter().any(|&v| v != 0.0))
        .take(k_count)
        .collect();
    if chosen.len() < k_count {
        return Err(Error::InsufficientData {
            drawn: chosen.len(),
            requested: k_count,
        });
    }
    let mut init = Matrix::zeros(volumes.nrows(), k_count);
    for (k, &j) in chosen.iter().enumerate() {
        init.column_mut(k).copy_from_slice(volumes.column(j).as_slice());
    }
    let mut dict = Dictionary::from_columns(init)?;

    let zero = Matrix::zeros(k_count, n);
    let mut codes = sparse_code_all(&dict, volumes, h, None)?;
    let mut trace = Vec::with_capacity(2 * h.num_iterations + 1);
    trace.push(TraceEntry {
        iteration: 0,
        step: HalfStep::Initial,
        before: data_objective(&dict.atoms, volumes, &zero, h.lambda0),
        after: data_objective(&dict.atoms, volumes, &codes.codes, h.lambda0),
        objective: full_objective(&dict.atoms, volumes, &codes.codes, h),
    });

    for it in 1..=h.num_iterations {
        let before = data_objective(&dict.atoms, volumes, &codes.codes, h.lambda0);
        let out = ksvd_update_penalized(&dict, volumes, &codes, h.lambda0)?;
        dict = out.dictionary;
        codes = out.codes;
        let after_ksvd = data_objective(&dict.atoms, volumes, &codes.codes, h.lambda0);
        let after = reseed_coherent(&mut dict, volumes, &mut codes, h.lambda0, before, after_ksvd);
        trace.push(TraceEntry {
            iteration: it,
            step: HalfStep::BasisUpdate,
            before,
            after,
            objective: full_objective(&dict.atoms, volumes, &codes.codes, h),
        });

        let before = after;
        codes = sparse_code_all(&dict, volumes, h, Some(&codes.codes))?;
        trace.push(TraceEntry {
            iteration: it,
            step: HalfStep::Coding,
            before,
            after: data_objective(&dict.atoms, volumes, &codes.codes, h.lambda0),
            objective: full_objective(&dict.atoms, volumes, &codes.codes, h),
        });
    }
    Ok(InverseModel {
        dictionary: dict,
        codes,
        trace,
    })
}

/// Replaces atoms nearly parallel to an earlier atom with worst-reconstructed
/// data columns. Dropping a used atom's code row costs objective, so a
/// reseed only happens while the half-step stays at or below `start`.
/// Returns the data objective afterwards.
fn reseed_coherent(dict: &mut Dictionary, volumes: &Matrix, codes: &mut SparseCodes, lambda0: f64, start: f64, current: f64) -> f64 {
    let k_count = dict.num_atoms();
    let mut value = current;
    let mut residual: Option<Matrix> = None;
    let mut taken: Vec<usize> = Vec::new();
    for k in 1..k_count {
        let coherent = (0..k).any(|j| math::abs(math::dot(dict.atom(j), dict.atom(k))) > COHERENCE_LIMIT);
        if !coherent {
            continue;
        }
        let r = residual.get_or_insert_with(|| volumes - &dict.atoms * &codes.codes);
        let atom = dict.atom(k).to_vec();
        let support: Vec<usize> = (0..codes.codes.ncols()).filter(|&j| codes.codes[(k, j)] != 0.0).collect();
        let mut delta = 0.0;
        for &j in &support {
            let x = codes.codes[(k, j)];
            let col = r.column(j);
            let before = col.norm_squared();
            let after: f64 = col.iter().zip(&atom).map(|(a, u)| (a + u * x) * (a + u * x)).sum();
            delta += 0.5 * (after - before) - lambda0 * math::abs(x);
        }
        if value + delta > start {
            continue;
        }
        for &j in &support {
            let x = codes.codes[(k, j)];
            math::axpy(x, &atom, r.column_mut(j).as_mut_slice());
            codes.codes[(k, j)] = 0.0;
        }
        value += delta;
        let worst = worst_columns(r, volumes);
        if let Some(&j) = worst.iter().find(|j| !taken.contains(j)) {
            taken.push(j);
            let mut col = volumes.column(j).as_slice().to_vec();
            math::normalize(&mut col);
            dict.atoms.column_mut(k).copy_from_slice(&col);
        }
    }
    match residual {
        Some(_) => data_objective(&dict.atoms, volumes, &codes.codes, lambda0),
        None => current,
    }
}
