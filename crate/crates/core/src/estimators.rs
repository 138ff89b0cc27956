//! Gradient estimators for the smoothed surrogate `F_beta`.
//!
//! * [`SagFState`]: SAG table for the smooth finite sum, `v_f = X^T alpha`.
//! * [`grad_g_full`]: deterministic `A^T grad g_beta(A w)`.
//! * [`SagGState`]: SAG table for a separable `g_beta`, `v_g = A^T gamma`.
//! * [`exact_grad`]: the full gradient of `F_beta`.
//!
//! Tables start at zero with zero aggregates. When a batch refreshes every
//! entry of a table, the aggregate is rebuilt from the table in index order,
//! which is exactly how [`exact_grad`] accumulates; a full refresh therefore
//! reproduces the deterministic gradient bit for bit.

use crate::error::{Error, Result};
use crate::model::{separable_coefficient, LinearFunctional, NonSmoothKind, NonSmoothTerm, ProblemInstance, SmoothTerm};

/// Coordinate updates between exact rebuilds of a running aggregate.
pub const DEFAULT_RESYNC_PERIOD: usize = 1_000_000;

/// Shared table bookkeeping for both SAG estimators.
#[derive(Debug, Clone)]
struct SagTable {
    entries: Vec<f64>,
    aggregate: Vec<f64>,
    resync_period: usize,
    since_resync: usize,
    stamps: Vec<u64>,
    epoch: u64,
}

impl SagTable {
    fn new(len: usize, d: usize, resync_period: usize) -> Self {
        SagTable {
            entries: vec![0.0; len],
            aggregate: vec![0.0; d],
            resync_period: resync_period.max(1),
            since_resync: 0,
            stamps: vec![0; len],
            epoch: 0,
        }
    }

    fn rebuild(&mut self, rows: &[LinearFunctional]) {
        self.aggregate.iter_mut().for_each(|v| *v = 0.0);
        for (row, &c) in rows.iter().zip(&self.entries) {
            row.axpy_into(c, &mut self.aggregate);
        }
        self.since_resync = 0;
    }

    /// Applies `entry[j] <- value(j)` for every `j` in the batch.
    fn update(
        &mut self,
        rows: &[LinearFunctional],
        batch: &[usize],
        mut value: impl FnMut(usize) -> f64,
    ) -> Result<()> {
        let len = self.entries.len();
        if let Some(&bad) = batch.iter().find(|&&j| j >= len) {
            return Err(Error::IndexOutOfRange { index: bad, len });
        }
        self.epoch += 1;
        let mut distinct = 0usize;
        for &j in batch {
            let fresh = value(j);
            let delta = fresh - self.entries[j];
            if delta != 0.0 {
                rows[j].axpy_into(delta, &mut self.aggregate);
            }
            self.entries[j] = fresh;
            self.since_resync += rows[j].nnz();
            if self.stamps[j] != self.epoch {
                self.stamps[j] = self.epoch;
                distinct += 1;
            }
        }
        if distinct == len || self.since_resync >= self.resync_period {
            self.rebuild(rows);
        }
        Ok(())
    }

    fn consistency_error(&self, rows: &[LinearFunctional]) -> f64 {
        let mut fresh = vec![0.0; self.aggregate.len()];
        for (row, &c) in rows.iter().zip(&self.entries) {
            row.axpy_into(c, &mut fresh);
        }
        fresh
            .iter()
            .zip(&self.aggregate)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// SAG state for the smooth term: `alpha_i` holds `(1/n) f_i'(x_i^T w)` at
/// the last point where sample `i` was drawn.
#[derive(Debug, Clone)]
pub struct SagFState {
    table: SagTable,
}

impl SagFState {
    pub fn new(n: usize, d: usize) -> Self {
        Self::with_resync_period(n, d, DEFAULT_RESYNC_PERIOD)
    }

    pub fn with_resync_period(n: usize, d: usize, resync_period: usize) -> Self {
        SagFState {
            table: SagTable::new(n, d, resync_period),
        }
    }

    pub fn alpha(&self) -> &[f64] {
        &self.table.entries
    }

    pub fn aggregate(&self) -> &[f64] {
        &self.table.aggregate
    }

    pub fn update(&mut self, w: &[f64], batch: &[usize], smooth: &SmoothTerm) -> Result<()> {
        self.table
            .update(smooth.rows(), batch, |j| smooth.scaled_derivative(j, w))
    }

    pub fn resync(&mut self, smooth: &SmoothTerm) {
        self.table.rebuild(smooth.rows());
    }

    /// `||v_f - X^T alpha||_2`.
    pub fn consistency_error(&self, smooth: &SmoothTerm) -> f64 {
        self.table.consistency_error(smooth.rows())
    }

    /// `sum_i |(1/n) f_i'(x_i^T w) - alpha_i|`.
    pub fn error_l1(&self, w: &[f64], smooth: &SmoothTerm) -> f64 {
        (0..smooth.n())
            .map(|i| (smooth.scaled_derivative(i, w) - self.table.entries[i]).abs())
            .sum()
    }
}

/// SAG state for a separable smoothed term: `gamma_q` holds
/// `(1/m) g_{q,beta}'(a_q^T w)` at the last sampled point and beta.
#[derive(Debug, Clone)]
pub struct SagGState {
    table: SagTable,
}

fn separable_components(nonsmooth: &NonSmoothTerm) -> Result<&[crate::prox::ScalarProxDescriptor]> {
    match nonsmooth.kind() {
        NonSmoothKind::Separable(c) => Ok(c),
        NonSmoothKind::ProxFriendly(_) => Err(Error::NotSeparable),
    }
}

impl SagGState {
    pub fn new(m: usize, d: usize) -> Self {
        Self::with_resync_period(m, d, DEFAULT_RESYNC_PERIOD)
    }

    pub fn with_resync_period(m: usize, d: usize, resync_period: usize) -> Self {
        SagGState {
            table: SagTable::new(m, d, resync_period),
        }
    }

    pub fn gamma(&self) -> &[f64] {
        &self.table.entries
    }

    pub fn aggregate(&self) -> &[f64] {
        &self.table.aggregate
    }

    pub fn update(&mut self, w: &[f64], batch: &[usize], nonsmooth: &NonSmoothTerm, beta: f64) -> Result<()> {
        let components = separable_components(nonsmooth)?;
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        let m = components.len();
        let rows = nonsmooth.map();
        self.table.update(rows, batch, |l| {
            separable_coefficient(&components[l], rows[l].dot(w), beta, m)
        })
    }

    pub fn resync(&mut self, nonsmooth: &NonSmoothTerm) {
        self.table.rebuild(nonsmooth.map());
    }

    pub fn consistency_error(&self, nonsmooth: &NonSmoothTerm) -> f64 {
        self.table.consistency_error(nonsmooth.map())
    }

    /// `sum_q |(1/m) g_{q,beta}'(a_q^T w) - gamma_q|`.
    pub fn error_l1(&self, w: &[f64], nonsmooth: &NonSmoothTerm, beta: f64) -> Result<f64> {
        let components = separable_components(nonsmooth)?;
        let m = components.len();
        Ok(nonsmooth
            .map()
            .iter()
            .zip(components)
            .zip(&self.table.entries)
            .map(|((row, g), &gamma)| (separable_coefficient(g, row.dot(w), beta, m) - gamma).abs())
            .sum())
    }
}

/// Free-function form of [`SagFState::update`].
pub fn sag_f_update(state: &mut SagFState, w: &[f64], batch: &[usize], smooth: &SmoothTerm) -> Result<()> {
    state.update(w, batch, smooth)
}

/// Free-function form of [`SagGState::update`].
pub fn sag_g_update(
    state: &mut SagGState,
    w: &[f64],
    batch: &[usize],
    nonsmooth: &NonSmoothTerm,
    beta: f64,
) -> Result<()> {
    state.update(w, batch, nonsmooth, beta)
}

/// `A^T grad g_beta(A w)`.
pub fn grad_g_full(nonsmooth: &NonSmoothTerm, w: &[f64], beta: f64) -> Result<Vec<f64>> {
    let z = nonsmooth.apply(w);
    let mut coeffs = vec![0.0; z.len()];
    nonsmooth.smoothed_grad_into(&z, beta, &mut coeffs)?;
    let mut out = vec![0.0; w.len()];
    for (row, &c) in nonsmooth.map().iter().zip(&coeffs) {
        row.axpy_into(c, &mut out);
    }
    Ok(out)
}

/// `X^T grad f(X w)` with the `1/n` normalization.
pub fn smooth_grad_full(smooth: &SmoothTerm, w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    for (i, row) in smooth.rows().iter().enumerate() {
        row.axpy_into(smooth.scaled_derivative(i, w), &mut out);
    }
    out
}

/// `grad F_beta(w) = X^T grad f(X w) + A^T grad g_beta(A w)`.
pub fn exact_grad(inst: &ProblemInstance, w: &[f64], beta: f64) -> Result<Vec<f64>> {
    if w.len() != inst.dim() {
        return Err(Error::DimensionMismatch {
            expected: inst.dim(),
            got: w.len(),
        });
    }
    let vf = smooth_grad_full(inst.smooth(), w);
    let vg = grad_g_full(inst.nonsmooth(), w, beta)?;
    Ok(vf.iter().zip(&vg).map(|(a, b)| a + b).collect())
}

/// Which table [`estimator_error_l1`] inspects.
pub enum EstimatorTerm<'a> {
    Smooth(&'a SagFState),
    NonSmooth(&'a SagGState),
}

/// l1 distance between a SAG table and the fresh scaled derivatives at `w`.
pub fn estimator_error_l1(term: EstimatorTerm<'_>, inst: &ProblemInstance, w: &[f64], beta: f64) -> Result<f64> {
    match term {
        EstimatorTerm::Smooth(state) => Ok(state.error_l1(w, inst.smooth())),
        EstimatorTerm::NonSmooth(state) => state.error_l1(w, inst.nonsmooth(), beta),
    }
}
