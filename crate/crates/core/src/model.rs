//! Problem model: decision variables, sparse linear functionals, the smooth
//! finite-sum term, the non-smooth term and the full problem instance
//!
//! ```text
//! min_{w in W}  (1/n) sum_i f_i(x_i^T w)  +  g(A w)
//! ```
//!
//! Matrix variables are flattened row-major over the full matrix, so a
//! `p x p` symmetric variable has `d = p^2` coordinates.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::oracles::FeasibleSetSpec;
use crate::prox::{ScalarProxDescriptor, VectorProxDescriptor};

/// Shape of a decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Vector(usize),
    /// General rectangular matrix, row-major.
    Matrix { rows: usize, cols: usize },
    /// Symmetric `p x p` matrix stored densely, row-major.
    Symmetric(usize),
}

impl Layout {
    pub fn dim(&self) -> usize {
        match *self {
            Layout::Vector(d) => d,
            Layout::Matrix { rows, cols } => rows * cols,
            Layout::Symmetric(p) => p * p,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVar {
    layout: Layout,
    values: Vec<f64>,
}

impl DecisionVar {
    pub fn new(layout: Layout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.dim(),
                got: values.len(),
            });
        }
        Ok(DecisionVar { layout, values })
    }

    pub fn zeros(layout: Layout) -> Self {
        DecisionVar {
            layout,
            values: vec![0.0; layout.dim()],
        }
    }

    pub fn vector(values: Vec<f64>) -> Self {
        DecisionVar {
            layout: Layout::Vector(values.len()),
            values,
        }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Largest `|W_ij - W_ji|`; zero for non-symmetric layouts.
    pub fn symmetry_defect(&self) -> f64 {
        match self.layout {
            Layout::Symmetric(p) => {
                let mut worst: f64 = 0.0;
                for i in 0..p {
                    for j in (i + 1)..p {
                        worst = worst.max((self.values[i * p + j] - self.values[j * p + i]).abs());
                    }
                }
                worst
            }
            _ => 0.0,
        }
    }

    /// `self <- (1 - eta) * self + eta * target`; exact at `eta = 1`.
    pub fn move_towards(&mut self, target: &[f64], eta: f64) {
        debug_assert_eq!(target.len(), self.values.len());
        let keep = 1.0 - eta;
        for (w, s) in self.values.iter_mut().zip(target) {
            *w = keep * *w + eta * s;
        }
    }
}

/// Sparse linear functional `u -> sum_k coeff_k * u[index_k]` over the
/// flattened decision variable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearFunctional {
    indices: Vec<usize>,
    coeffs: Vec<f64>,
}

impl LinearFunctional {
    /// Builds a functional from `(index, coefficient)` pairs. Duplicate
    /// indices and non-finite coefficients are rejected.
    pub fn new(mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::InvalidParameter(format!(
                    "duplicate coordinate index {} in linear functional",
                    pair[0].0
                )));
            }
        }
        if entries.iter().any(|e| !e.1.is_finite()) {
            return Err(Error::NonFinite("linear functional coefficients"));
        }
        let (indices, coeffs) = entries.into_iter().unzip();
        Ok(LinearFunctional { indices, coeffs })
    }

    /// Like [`LinearFunctional::new`] but sums duplicate indices and drops
    /// exact zeros. Convenient for assembling symmetric stencils.
    pub fn accumulate(entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut entries: Vec<(usize, f64)> = entries.into_iter().collect();
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (i, c) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => merged.push((i, c)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        Self::new(merged)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn coordinate(index: usize) -> Self {
        LinearFunctional {
            indices: vec![index],
            coeffs: vec![1.0],
        }
    }

    /// Dense coefficient vector; zeros are skipped.
    pub fn from_dense(dense: &[f64]) -> Result<Self> {
        Self::new(
            dense
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(i, c)| (i, *c))
                .collect(),
        )
    }

    /// Functional computing `<S, W>` for a symmetric `p x p` variable, given
    /// the (not necessarily symmetric) dense matrix `S` in row-major order.
    /// The stored coefficients are the symmetrization `(S + S^T) / 2`.
    pub fn symmetric_inner(p: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != p * p {
            return Err(Error::DimensionMismatch {
                expected: p * p,
                got: dense.len(),
            });
        }
        let mut sym = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                sym[i * p + j] = 0.5 * (dense[i * p + j] + dense[j * p + i]);
            }
        }
        Self::from_dense(&sym)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.indices.last().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.coeffs.iter().copied())
    }

    /// Dot product with a raw slice; the caller guarantees the index range.
    #[inline]
    pub fn dot(&self, w: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (&i, &c) in self.indices.iter().zip(&self.coeffs) {
            acc += c * w[i];
        }
        acc
    }

    /// `out += scale * self`.
    #[inline]
    pub fn axpy_into(&self, scale: f64, out: &mut [f64]) {
        for (&i, &c) in self.indices.iter().zip(&self.coeffs) {
            out[i] += scale * c;
        }
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    pub fn to_dense(&self, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d];
        self.axpy_into(1.0, &mut out);
        out
    }

    fn check_range(&self, d: usize) -> Result<()> {
        match self.max_index() {
            Some(i) if i >= d => Err(Error::IndexOutOfRange { index: i, len: d }),
            _ => Ok(()),
        }
    }
}

pub fn row_dot(functional: &LinearFunctional, w: &DecisionVar) -> Result<f64> {
    functional.check_range(w.dim())?;
    Ok(functional.dot(w.values()))
}

pub fn apply_map(map: &[LinearFunctional], w: &DecisionVar) -> Result<Vec<f64>> {
    map.iter().map(|row| row_dot(row, w)).collect()
}

/// `out = A^T y` for a map given as rows.
pub fn apply_adjoint(map: &[LinearFunctional], y: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d];
    for (row, &c) in map.iter().zip(y) {
        row.axpy_into(c, &mut out);
    }
    out
}

/// User-supplied scalar convex function with an analytic derivative.
pub trait ScalarFunction: Send + Sync {
    fn value(&self, u: f64) -> f64;
    fn derivative(&self, u: f64) -> f64;
}

#[derive(Clone)]
pub enum ScalarLoss {
    /// `slope * u`
    Linear { slope: f64 },
    /// `weight * (u - target)^2`
    Squared { target: f64, weight: f64 },
    Custom(Arc<dyn ScalarFunction>),
}

impl fmt::Debug for ScalarLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarLoss::Linear { slope } => write!(f, "Linear({slope})"),
            ScalarLoss::Squared { target, weight } => write!(f, "Squared({target}, {weight})"),
            ScalarLoss::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl ScalarLoss {
    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        match self {
            ScalarLoss::Linear { slope } => slope * u,
            ScalarLoss::Squared { target, weight } => weight * (u - target) * (u - target),
            ScalarLoss::Custom(func) => func.value(u),
        }
    }

    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            ScalarLoss::Linear { slope } => *slope,
            ScalarLoss::Squared { target, weight } => 2.0 * weight * (u - target),
            ScalarLoss::Custom(func) => func.derivative(u),
        }
    }
}

/// `(1/n) sum_i f_i(x_i^T w)`.
#[derive(Debug, Clone)]
pub struct SmoothTerm {
    rows: Vec<LinearFunctional>,
    losses: Vec<ScalarLoss>,
    lipschitz: f64,
}

impl SmoothTerm {
    pub fn new(rows: Vec<LinearFunctional>, losses: Vec<ScalarLoss>, lipschitz: f64) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidParameter("smooth term needs n >= 1 rows".into()));
        }
        if rows.len() != losses.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: losses.len(),
            });
        }
        if !(lipschitz >= 0.0) {
            return Err(Error::InvalidParameter("L_f must be non-negative".into()));
        }
        Ok(SmoothTerm { rows, losses, lipschitz })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[LinearFunctional] {
        &self.rows
    }

    pub fn losses(&self) -> &[ScalarLoss] {
        &self.losses
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// SAG table entry `(1/n) f_i'(x_i^T w)`.
    #[inline]
    pub fn scaled_derivative(&self, i: usize, w: &[f64]) -> f64 {
        let u = self.rows[i].dot(w);
        self.losses[i].derivative(u) / self.rows.len() as f64
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        let sum: f64 = self
            .rows
            .iter()
            .zip(&self.losses)
            .map(|(row, loss)| loss.value(row.dot(w)))
            .sum();
        sum / self.rows.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NonSmoothKind {
    /// Whole-vector prox: `g(z)` with the descriptor's own scaling.
    ProxFriendly(VectorProxDescriptor),
    /// `g(z) = (1/m) sum_j g_j(z_j)`.
    Separable(Vec<ScalarProxDescriptor>),
}

/// The non-smooth term `g(A w)`.
#[derive(Debug, Clone)]
pub struct NonSmoothTerm {
    kind: NonSmoothKind,
    map: Vec<LinearFunctional>,
    lipschitz: Option<f64>,
}

impl NonSmoothTerm {
    pub fn new(kind: NonSmoothKind, map: Vec<LinearFunctional>, lipschitz: Option<f64>) -> Result<Self> {
        match &kind {
            NonSmoothKind::Separable(components) => {
                if components.len() != map.len() {
                    return Err(Error::DimensionMismatch {
                        expected: map.len(),
                        got: components.len(),
                    });
                }
                for c in components {
                    c.validate()?;
                }
            }
            NonSmoothKind::ProxFriendly(desc) => {
                desc.validate()?;
                desc.check_len(map.len())?;
            }
        }
        if let Some(l) = lipschitz {
            if !(l >= 0.0) {
                return Err(Error::InvalidParameter("L_g must be non-negative".into()));
            }
        }
        Ok(NonSmoothTerm { kind, map, lipschitz })
    }

    /// `g = 0` (empty map).
    pub fn zero() -> Self {
        NonSmoothTerm {
            kind: NonSmoothKind::ProxFriendly(VectorProxDescriptor::ProductOfScalars(Vec::new())),
            map: Vec::new(),
            lipschitz: Some(0.0),
        }
    }

    pub fn kind(&self) -> &NonSmoothKind {
        &self.kind
    }

    pub fn map(&self) -> &[LinearFunctional] {
        &self.map
    }

    pub fn m(&self) -> usize {
        self.map.len()
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn is_separable(&self) -> bool {
        matches!(self.kind, NonSmoothKind::Separable(_))
    }

    /// True when `g` is the indicator of a set (and `m >= 1`).
    pub fn is_indicator(&self) -> bool {
        if self.map.is_empty() {
            return false;
        }
        match &self.kind {
            NonSmoothKind::ProxFriendly(desc) => desc.is_indicator(),
            NonSmoothKind::Separable(c) => c.iter().all(|c| c.is_indicator()),
        }
    }

    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        self.map.iter().map(|row| row.dot(w)).collect()
    }

    /// Value of `g(z)` with infinite values for indicators evaluated exactly
    /// (no tolerance); see [`objective`] for the tolerant version.
    pub fn value(&self, z: &[f64]) -> f64 {
        match &self.kind {
            NonSmoothKind::ProxFriendly(desc) => desc.value(z),
            NonSmoothKind::Separable(c) => {
                if c.is_empty() {
                    return 0.0;
                }
                let s: f64 = c.iter().zip(z).map(|(g, &zj)| g.value(zj)).sum();
                s / c.len() as f64
            }
        }
    }

    /// Continuous part of `g(z)`, ignoring indicator components.
    fn continuous_value(&self, z: &[f64]) -> f64 {
        match &self.kind {
            NonSmoothKind::ProxFriendly(desc) => desc.continuous_value(z),
            NonSmoothKind::Separable(c) => {
                if c.is_empty() {
                    return 0.0;
                }
                let s: f64 = c
                    .iter()
                    .zip(z)
                    .filter(|(g, _)| !g.is_indicator())
                    .map(|(g, &zj)| g.value(zj))
                    .sum();
                s / c.len() as f64
            }
        }
    }

    /// Euclidean distance from `z` to the set described by the indicator
    /// components (continuous components contribute nothing).
    pub fn indicator_distance(&self, z: &[f64]) -> f64 {
        match &self.kind {
            NonSmoothKind::ProxFriendly(desc) => desc.indicator_distance(z),
            NonSmoothKind::Separable(c) => c
                .iter()
                .zip(z)
                .map(|(g, &zj)| g.distance(zj).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Smoothed value `g_beta(z)`. Separable terms smooth each component
    /// with the same beta: `g_beta(z) = (1/m) sum_j g_{j,beta}(z_j)`.
    pub fn smoothed_value(&self, z: &[f64], beta: f64) -> Result<f64> {
        match &self.kind {
            NonSmoothKind::ProxFriendly(desc) => crate::prox::smoothed_value(desc, z, beta),
            NonSmoothKind::Separable(c) => {
                if c.is_empty() {
                    return Ok(0.0);
                }
                let mut s = 0.0;
                for (g, &zj) in c.iter().zip(z) {
                    s += g.smoothed_value(zj, beta)?;
                }
                Ok(s / c.len() as f64)
            }
        }
    }

    /// Gradient of `g_beta` at `z`, written into `out` (length m).
    pub fn smoothed_grad_into(&self, z: &[f64], beta: f64, out: &mut [f64]) -> Result<()> {
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        match &self.kind {
            NonSmoothKind::ProxFriendly(desc) => {
                let grad = crate::prox::smoothed_grad(desc, z, beta)?;
                out.copy_from_slice(&grad);
            }
            NonSmoothKind::Separable(c) => {
                let m = c.len();
                for ((o, g), &zj) in out.iter_mut().zip(c).zip(z) {
                    *o = separable_coefficient(g, zj, beta, m);
                }
            }
        }
        Ok(())
    }
}

/// Scaled component derivative `(1/m) g_{j,beta}'(z)`: the SAG table entry
/// for a separable term.
#[inline]
pub fn separable_coefficient(g: &ScalarProxDescriptor, z: f64, beta: f64, m: usize) -> f64 {
    ((z - g.prox_unchecked(z, beta)) / beta) / m as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    /// Known in closed form from the instance construction.
    Planted,
    /// Obtained from a long deterministic run.
    LongExactRun,
    /// Supplied by the caller.
    External,
}

#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub point: Option<DecisionVar>,
    pub value: Option<f64>,
    pub source: ReferenceSource,
}

/// Held-out observations `(coordinate, target)` for RMSE reporting.
#[derive(Debug, Clone, Default)]
pub struct HeldOut {
    pub entries: Vec<(usize, f64)>,
}

impl HeldOut {
    pub fn rmse(&self, w: &[f64]) -> Option<f64> {
        if self.entries.is_empty() {
            return None;
        }
        let sse: f64 = self.entries.iter().map(|&(i, t)| (w[i] - t).powi(2)).sum();
        Some((sse / self.entries.len() as f64).sqrt())
    }
}

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    smooth: SmoothTerm,
    nonsmooth: NonSmoothTerm,
    feasible_set: FeasibleSetSpec,
    pub reference: Option<ReferenceSolution>,
    pub test_data: Option<HeldOut>,
}

impl ProblemInstance {
    pub fn new(smooth: SmoothTerm, nonsmooth: NonSmoothTerm, feasible_set: FeasibleSetSpec) -> Result<Self> {
        let d = feasible_set.dim();
        for row in smooth.rows().iter().chain(nonsmooth.map()) {
            row.check_range(d)?;
        }
        Ok(ProblemInstance {
            smooth,
            nonsmooth,
            feasible_set,
            reference: None,
            test_data: None,
        })
    }

    pub fn with_reference(mut self, reference: ReferenceSolution) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn smooth(&self) -> &SmoothTerm {
        &self.smooth
    }

    pub fn nonsmooth(&self) -> &NonSmoothTerm {
        &self.nonsmooth
    }

    pub fn feasible_set(&self) -> &FeasibleSetSpec {
        &self.feasible_set
    }

    pub fn dim(&self) -> usize {
        self.feasible_set.dim()
    }

    pub fn layout(&self) -> Layout {
        self.feasible_set.layout()
    }

    pub fn reference_value(&self) -> Option<f64> {
        self.reference.as_ref().and_then(|r| r.value)
    }

    fn check_var(&self, w: &DecisionVar) -> Result<()> {
        if w.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: w.dim(),
            });
        }
        Ok(())
    }

    /// Smoothed surrogate `F_beta(w) = f(w) + g_beta(A w)`.
    pub fn surrogate_value(&self, w: &DecisionVar, beta: f64) -> Result<f64> {
        self.check_var(w)?;
        let z = self.nonsmooth.apply(w.values());
        Ok(self.smooth.value(w.values()) + self.nonsmooth.smoothed_value(&z, beta)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub f: f64,
    pub g: f64,
    pub total: f64,
}

/// Relative tolerance under which an indicator is treated as satisfied.
pub const INDICATOR_TOLERANCE: f64 = 1e-9;

/// Evaluates `(f, g, F)` at `w`. Indicator components report `+inf` only
/// when `dist(Aw, K) > 1e-9 (1 + ||Aw||)`.
pub fn objective(inst: &ProblemInstance, w: &DecisionVar) -> Result<ObjectiveValue> {
    inst.check_var(w)?;
    debug_assert!(
        w.symmetry_defect() <= 1e-12,
        "symmetric iterate lost symmetry: {}",
        w.symmetry_defect()
    );
    let f = inst.smooth.value(w.values());
    if !f.is_finite() {
        return Err(Error::NonFinite("smooth term value"));
    }
    let z = inst.nonsmooth.apply(w.values());
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("constraint map"));
    }
    let mut g = inst.nonsmooth.continuous_value(&z);
    if !g.is_finite() {
        return Err(Error::NonFinite("non-smooth term value"));
    }
    let norm_z = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if inst.nonsmooth.indicator_distance(&z) > INDICATOR_TOLERANCE * (1.0 + norm_z) {
        g = f64::INFINITY;
    }
    Ok(ObjectiveValue { f, g, total: f + g })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::FeasibleSetSpec;

    fn vec2(a: f64, b: f64) -> DecisionVar {
        DecisionVar::vector(vec![a, b])
    }

    #[test]
    fn row_dot_examples() {
        let pick = LinearFunctional::coordinate(0);
        assert_eq!(row_dot(&pick, &vec2(3.0, -1.0)).unwrap(), 3.0);
        assert_eq!(row_dot(&LinearFunctional::empty(), &vec2(3.0, -1.0)).unwrap(), 0.0);
        let f = LinearFunctional::new(vec![(0, 2.0), (1, -1.0)]).unwrap();
        assert_eq!(row_dot(&f, &vec2(1.0, 1.0)).unwrap(), 1.0);
    }

    #[test]
    fn row_dot_rejects_out_of_range() {
        let f = LinearFunctional::coordinate(5);
        assert!(matches!(
            row_dot(&f, &vec2(1.0, 1.0)),
            Err(Error::IndexOutOfRange { index: 5, len: 2 })
        ));
    }

    #[test]
    fn functional_rejects_duplicates_and_nan() {
        assert!(LinearFunctional::new(vec![(1, 1.0), (1, 2.0)]).is_err());
        assert!(LinearFunctional::new(vec![(0, f64::NAN)]).is_err());
        let acc = LinearFunctional::accumulate(vec![(1, 1.0), (1, 2.0), (0, 0.0)]).unwrap();
        assert_eq!(acc.indices(), &[1]);
        assert_eq!(acc.coeffs(), &[3.0]);
    }

    #[test]
    fn apply_map_examples() {
        let id = vec![LinearFunctional::coordinate(0), LinearFunctional::coordinate(1)];
        assert_eq!(apply_map(&id, &vec2(1.0, 2.0)).unwrap(), vec![1.0, 2.0]);
        let zero = vec![LinearFunctional::empty()];
        assert_eq!(apply_map(&zero, &vec2(7.0, 2.0)).unwrap(), vec![0.0]);
        let rows = vec![
            LinearFunctional::new(vec![(0, 1.0), (1, 1.0)]).unwrap(),
            LinearFunctional::new(vec![(0, 1.0), (1, -1.0)]).unwrap(),
        ];
        assert_eq!(apply_map(&rows, &vec2(2.0, 3.0)).unwrap(), vec![5.0, -1.0]);
    }

    fn quad_instance(g: NonSmoothTerm) -> ProblemInstance {
        let smooth = SmoothTerm::new(
            vec![LinearFunctional::coordinate(0)],
            vec![ScalarLoss::Squared { target: 0.0, weight: 1.0 }],
            2.0,
        )
        .unwrap();
        let set = FeasibleSetSpec::atoms(vec![vec![2.0, 0.0], vec![-2.0, -3.0], vec![1.0, 1.0]]).unwrap();
        ProblemInstance::new(smooth, g, set).unwrap()
    }

    #[test]
    fn objective_quadratic_without_g() {
        let inst = quad_instance(NonSmoothTerm::zero());
        let obj = objective(&inst, &vec2(2.0, 0.0)).unwrap();
        assert_eq!((obj.f, obj.g, obj.total), (4.0, 0.0, 4.0));
    }

    #[test]
    fn objective_indicator_of_point() {
        let map = vec![LinearFunctional::coordinate(0), LinearFunctional::coordinate(1)];
        let g = NonSmoothTerm::new(
            NonSmoothKind::ProxFriendly(VectorProxDescriptor::IndicatorAffinePoint(vec![2.0, 0.0])),
            map,
            None,
        )
        .unwrap();
        let inst = quad_instance(g);
        assert_eq!(objective(&inst, &vec2(2.0, 0.0)).unwrap().g, 0.0);
        assert_eq!(objective(&inst, &vec2(1.0, 1.0)).unwrap().g, f64::INFINITY);
        // within the floating-point tolerance the point still counts as feasible
        assert_eq!(objective(&inst, &vec2(2.0 + 1e-12, 0.0)).unwrap().g, 0.0);
    }

    #[test]
    fn objective_l1_term() {
        let map = vec![LinearFunctional::coordinate(0), LinearFunctional::coordinate(1)];
        let g = NonSmoothTerm::new(
            NonSmoothKind::ProxFriendly(VectorProxDescriptor::L1(0.1)),
            map,
            Some(0.1 * 2f64.sqrt()),
        )
        .unwrap();
        let inst = quad_instance(g);
        let obj = objective(&inst, &vec2(-2.0, 3.0)).unwrap();
        assert!((obj.g - 0.5).abs() < 1e-15);
    }

    #[test]
    fn separable_value_carries_one_over_m() {
        let map = vec![LinearFunctional::coordinate(0), LinearFunctional::coordinate(1)];
        let g = NonSmoothTerm::new(
            NonSmoothKind::Separable(vec![ScalarProxDescriptor::AbsValue(1.0); 2]),
            map,
            None,
        )
        .unwrap();
        assert_eq!(g.value(&[2.0, -4.0]), 3.0);
    }

    #[test]
    fn symmetric_inner_matches_dense_inner_product() {
        let p = 3;
        let s: Vec<f64> = (0..9).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut w = vec![0.0; 9];
        for i in 0..p {
            for j in 0..p {
                w[i * p + j] = ((i + j) as f64).cos() + (i * j) as f64;
            }
        }
        let f = LinearFunctional::symmetric_inner(p, &s).unwrap();
        let dense: f64 = s.iter().zip(&w).map(|(a, b)| a * b).sum();
        assert!((f.dot(&w) - dense).abs() < 1e-12);
        for i in 0..p {
            for j in 0..p {
                let lhs: f64 = f.iter().filter(|e| e.0 == i * p + j).map(|e| e.1).sum();
                let rhs: f64 = f.iter().filter(|e| e.0 == j * p + i).map(|e| e.1).sum();
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn objective_is_pure() {
        let inst = quad_instance(NonSmoothTerm::zero());
        let w = vec2(0.3, -0.7);
        let a = objective(&inst, &w).unwrap();
        let b = objective(&inst, &w.clone()).unwrap();
        assert_eq!(a.total.to_bits(), b.total.to_bits());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn apply_map_is_affine(
                u in proptest::collection::vec(-5.0f64..5.0, 4),
                v in proptest::collection::vec(-5.0f64..5.0, 4),
                coeffs in proptest::collection::vec(-3.0f64..3.0, 12),
                t in 0.0f64..1.0,
            ) {
                let rows: Vec<_> = coeffs
                    .chunks(4)
                    .map(|c| LinearFunctional::from_dense(c).unwrap())
                    .collect();
                let mix: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + t * (b - a)).collect();
                let au = apply_map(&rows, &DecisionVar::vector(u)).unwrap();
                let av = apply_map(&rows, &DecisionVar::vector(v)).unwrap();
                let am = apply_map(&rows, &DecisionVar::vector(mix)).unwrap();
                for j in 0..rows.len() {
                    prop_assert!((am[j] - (au[j] + t * (av[j] - au[j]))).abs() <= 1e-12);
                }
            }
        }
    }
}
