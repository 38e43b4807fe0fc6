//! Objective bookkeeping for the alternating learners.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfStep {
    /// First coding pass after initialization.
    Initial,
    Coding,
    BasisUpdate,
}

/// One half-step of an alternating learner.
///
/// `before`/`after` bracket the sub-objective that the half-step minimizes;
/// `objective` is the full regularized objective after the half-step, `None`
/// when the regularizer's log-determinant is undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub step: HalfStep,
    pub before: f64,
    pub after: f64,
    pub objective: Option<f64>,
}

impl TraceEntry {
    /// `after <= before` up to `rel_tol` relative to `|before|` (absolute
    /// when `before` is 0).
    pub fn is_descent(&self, rel_tol: f64) -> bool {
        self.after <= self.before + rel_tol * self.before.abs().max(1.0)
    }
}
