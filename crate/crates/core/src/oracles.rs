//! Linear minimization oracles and diameter quantities for the compact
//! feasible sets.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DecisionVar, Layout, LinearFunctional};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EigenSolver {
    Dense,
    PowerIteration { tol: f64, max_iter: usize },
}

impl EigenSolver {
    pub fn power_iteration() -> Self {
        EigenSolver::PowerIteration {
            tol: 1e-9,
            max_iter: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SetKind {
    /// `{ W in R^{rows x cols} : ||W||_* <= radius }`.
    NuclearBall { radius: f64, rows: usize, cols: usize },
    /// `{ W in S^p_+ : Tr(W) <= trace }`.
    PsdTraceBall { trace: f64, side: usize },
    /// Convex hull of explicit vertices.
    AtomSet(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSetSpec {
    kind: SetKind,
    eigen_solver: EigenSolver,
}

impl FeasibleSetSpec {
    pub fn nuclear_ball(radius: f64, rows: usize, cols: usize) -> Result<Self> {
        if !(radius > 0.0) || rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "nuclear ball needs radius > 0 and non-empty shape, got {radius} ({rows}x{cols})"
            )));
        }
        Ok(FeasibleSetSpec {
            kind: SetKind::NuclearBall { radius, rows, cols },
            eigen_solver: EigenSolver::Dense,
        })
    }

    pub fn psd_trace_ball(trace: f64, side: usize) -> Result<Self> {
        if !(trace > 0.0) || side == 0 {
            return Err(Error::InvalidParameter(format!(
                "PSD trace ball needs trace > 0 and side >= 1, got {trace} (side {side})"
            )));
        }
        Ok(FeasibleSetSpec {
            kind: SetKind::PsdTraceBall { trace, side },
            eigen_solver: EigenSolver::Dense,
        })
    }

    pub fn atoms(atoms: Vec<Vec<f64>>) -> Result<Self> {
        let d = match atoms.first() {
            Some(a) if !a.is_empty() => a.len(),
            _ => return Err(Error::InvalidParameter("atom set must be non-empty".into())),
        };
        if let Some(bad) = atoms.iter().find(|a| a.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: bad.len() });
        }
        if atoms.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("atom coordinates"));
        }
        Ok(FeasibleSetSpec {
            kind: SetKind::AtomSet(atoms),
            eigen_solver: EigenSolver::Dense,
        })
    }

    pub fn with_eigen_solver(mut self, solver: EigenSolver) -> Self {
        self.eigen_solver = solver;
        self
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn eigen_solver(&self) -> EigenSolver {
        self.eigen_solver
    }

    pub fn layout(&self) -> Layout {
        match self.kind {
            SetKind::NuclearBall { rows: 1, cols, .. } => Layout::Vector(cols),
            SetKind::NuclearBall { rows, cols, .. } => Layout::Matrix { rows, cols },
            SetKind::PsdTraceBall { side, .. } => Layout::Symmetric(side),
            SetKind::AtomSet(ref a) => Layout::Vector(a[0].len()),
        }
    }

    pub fn dim(&self) -> usize {
        self.layout().dim()
    }

    /// How far `w` is from satisfying the set's defining inequalities:
    /// trace excess and negative eigenvalue mass (PSD), nuclear norm excess.
    /// Atom sets report `None` (membership would need an LP).
    pub fn membership_violation(&self, w: &[f64]) -> Option<f64> {
        match self.kind {
            SetKind::PsdTraceBall { trace, side } => {
                let m = symmetric_matrix(w, side);
                let tr = m.trace();
                let lmin = m.symmetric_eigenvalues().min();
                Some((tr - trace).max(0.0).max(-lmin))
            }
            SetKind::NuclearBall { radius, rows, cols } => {
                let m = DMatrix::from_row_slice(rows, cols, w);
                let nuc: f64 = m.singular_values().iter().sum();
                Some((nuc - radius).max(0.0))
            }
            SetKind::AtomSet(_) => None,
        }
    }
}

fn symmetric_matrix(v: &[f64], p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| 0.5 * (v[i * p + j] + v[j * p + i]))
}

/// Flips `q` so that its first entry of largest magnitude is positive.
fn normalize_sign(q: &mut [f64]) -> bool {
    let mut best = 0usize;
    for (i, v) in q.iter().enumerate() {
        if v.abs() > q[best].abs() {
            best = i;
        }
    }
    if q[best] < 0.0 {
        for v in q.iter_mut() {
            *v = -*v;
        }
        true
    } else {
        false
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Deterministic, non-degenerate start vector for power iterations.
fn start_vector(len: usize) -> Vec<f64> {
    let mut x: Vec<f64> = (0..len).map(|i| 1.0 + 0.1 * ((i as f64 + 1.0) * 0.7548776662).fract()).collect();
    let n = norm2(&x);
    x.iter_mut().for_each(|v| *v /= n);
    x
}

/// Minimum eigenpair of the symmetric matrix stored in `v`.
fn min_eigenpair(v: &[f64], p: usize, solver: EigenSolver) -> Result<(f64, Vec<f64>)> {
    match solver {
        EigenSolver::Dense => {
            let eig = SymmetricEigen::new(symmetric_matrix(v, p));
            let mut idx = 0;
            for i in 1..p {
                if eig.eigenvalues[i] < eig.eigenvalues[idx] {
                    idx = i;
                }
            }
            let q: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
            Ok((eig.eigenvalues[idx], q))
        }
        EigenSolver::PowerIteration { tol, max_iter } => {
            let m = symmetric_matrix(v, p);
            // the max absolute row sum bounds the spectral radius, so
            // shift * I - V is PSD and its top eigenvector is V's bottom one
            let shift = (0..p)
                .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
                .fold(0.0, f64::max);
            let mut x = DVector::from_vec(start_vector(p));
            let mut residual = f64::INFINITY;
            for _ in 0..max_iter {
                let mx = &m * &x;
                let lambda = x.dot(&mx);
                residual = (&mx - lambda * &x).norm();
                if residual <= tol * shift.max(1.0) {
                    return Ok((lambda, x.iter().copied().collect()));
                }
                let y = shift * &x - mx;
                let ny = y.norm();
                if ny == 0.0 {
                    break;
                }
                x = y / ny;
            }
            Err(Error::EigenNonConvergence {
                iterations: max_iter,
                residual,
            })
        }
    }
}

/// Top singular triple `(sigma, u, v)` of the `rows x cols` matrix in `g`.
fn top_singular_triple(g: &[f64], rows: usize, cols: usize, solver: EigenSolver) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let m = DMatrix::from_row_slice(rows, cols, g);
    match solver {
        EigenSolver::Dense => {
            let svd = SVD::new(m, true, true);
            let mut idx = 0;
            for i in 1..svd.singular_values.len() {
                if svd.singular_values[i] > svd.singular_values[idx] {
                    idx = i;
                }
            }
            let u = svd.u.as_ref().expect("requested U").column(idx).iter().copied().collect();
            let v = svd.v_t.as_ref().expect("requested V^T").row(idx).iter().copied().collect();
            Ok((svd.singular_values[idx], u, v))
        }
        EigenSolver::PowerIteration { tol, max_iter } => {
            let mt = m.transpose();
            let mut x = DVector::from_vec(start_vector(cols));
            let mut residual = f64::INFINITY;
            for _ in 0..max_iter {
                let mx = &m * &x;
                let sigma = mx.norm();
                if sigma == 0.0 {
                    break;
                }
                let u = mx / sigma;
                let mtu = &mt * &u;
                residual = (&mtu - sigma * &x).norm();
                if residual <= tol * sigma.max(1.0) {
                    return Ok((sigma, u.iter().copied().collect(), x.iter().copied().collect()));
                }
                let n = mtu.norm();
                x = mtu / n;
            }
            Err(Error::EigenNonConvergence {
                iterations: max_iter,
                residual,
            })
        }
    }
}

/// `argmin_{u in W} <u, v>`.
pub fn lmo(set: &FeasibleSetSpec, v: &[f64]) -> Result<DecisionVar> {
    let d = set.dim();
    if v.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: v.len() });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("LMO direction"));
    }
    let layout = set.layout();
    let mut out = vec![0.0; d];
    match set.kind {
        SetKind::PsdTraceBall { trace, side } => {
            if v.iter().any(|&x| x != 0.0) {
                let (lambda, mut q) = min_eigenpair(v, side, set.eigen_solver)?;
                if lambda < 0.0 {
                    normalize_sign(&mut q);
                    for i in 0..side {
                        for j in 0..side {
                            out[i * side + j] = trace * q[i] * q[j];
                        }
                    }
                }
            }
        }
        SetKind::NuclearBall { radius, rows, cols } => {
            if v.iter().any(|&x| x != 0.0) {
                let (sigma, mut u, mut w) = top_singular_triple(v, rows, cols, set.eigen_solver)?;
                if sigma > 0.0 {
                    if normalize_sign(&mut u) {
                        w.iter_mut().for_each(|x| *x = -*x);
                    }
                    for i in 0..rows {
                        for j in 0..cols {
                            out[i * cols + j] = -radius * u[i] * w[j];
                        }
                    }
                }
            }
        }
        SetKind::AtomSet(ref atoms) => {
            let mut best = 0;
            let mut best_val = f64::INFINITY;
            for (i, a) in atoms.iter().enumerate() {
                let val: f64 = a.iter().zip(v).map(|(x, y)| x * y).sum();
                if val < best_val {
                    best_val = val;
                    best = i;
                }
            }
            out.copy_from_slice(&atoms[best]);
        }
    }
    DecisionVar::new(layout, out)
}

/// Euclidean diameter `max_{x,y in W} ||x - y||_2`.
pub fn diameter(set: &FeasibleSetSpec) -> f64 {
    match set.kind {
        SetKind::NuclearBall { radius, .. } => 2.0 * radius,
        SetKind::PsdTraceBall { trace, side } => {
            if side >= 2 {
                trace * 2f64.sqrt()
            } else {
                trace
            }
        }
        SetKind::AtomSet(ref atoms) => {
            let mut best: f64 = 0.0;
            for (i, a) in atoms.iter().enumerate() {
                for b in &atoms[i + 1..] {
                    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
                    best = best.max(d2.sqrt());
                }
            }
            best
        }
    }
}

/// `D_1(M)` and `D_inf(M)`; `exact` is false when the values are sampled
/// lower estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapDiameters {
    pub l1: f64,
    pub linf: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct DiameterSampling {
    /// Number of random directions fed to the LMO to grow the atom pool.
    pub directions: usize,
    /// Rows whose range over `W` is computed exactly via two LMO calls.
    pub max_exact_rows: usize,
}

impl Default for DiameterSampling {
    fn default() -> Self {
        // 150 atoms give > 10^4 pairs
        DiameterSampling {
            directions: 150,
            max_exact_rows: 2000,
        }
    }
}

fn apply_rows(map: &[LinearFunctional], x: &[f64]) -> Vec<f64> {
    map.iter().map(|r| r.dot(x)).collect()
}

fn pair_norms(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut l1 = 0.0;
    let mut linf: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = (x - y).abs();
        l1 += d;
        linf = linf.max(d);
    }
    (l1, linf)
}

fn best_pairs(images: &[Vec<f64>]) -> (f64, f64) {
    let mut l1: f64 = 0.0;
    let mut linf: f64 = 0.0;
    for (i, a) in images.iter().enumerate() {
        for b in &images[i + 1..] {
            let (p, q) = pair_norms(a, b);
            l1 = l1.max(p);
            linf = linf.max(q);
        }
    }
    (l1, linf)
}

/// Diameters of `W` measured through the rows of `M`.
///
/// Atom sets are handled by exhaustive search. For continuous sets the
/// result is assembled from (a) the exact range `max_u m_j u - min_u m_j u`
/// of up to `max_exact_rows` rows and (b) pairwise distances in a pool of
/// LMO atoms for random Gaussian and random sign directions. Samples are
/// drawn in a fixed order, so a larger `directions` count only ever adds
/// atoms to the pool.
pub fn map_diameters(
    set: &FeasibleSetSpec,
    map: &[LinearFunctional],
    sampling: DiameterSampling,
    rng: &mut ChaCha8Rng,
) -> Result<MapDiameters> {
    let d = set.dim();
    if let Some(bad) = map.iter().filter_map(|r| r.max_index()).find(|&i| i >= d) {
        return Err(Error::IndexOutOfRange { index: bad, len: d });
    }
    if map.is_empty() {
        return Ok(MapDiameters {
            l1: 0.0,
            linf: 0.0,
            exact: true,
        });
    }
    if let SetKind::AtomSet(ref atoms) = set.kind {
        let images: Vec<Vec<f64>> = atoms.iter().map(|a| apply_rows(map, a)).collect();
        let (l1, linf) = best_pairs(&images);
        return Ok(MapDiameters { l1, linf, exact: true });
    }

    let mut images: Vec<Vec<f64>> = Vec::new();
    let mut linf: f64 = 0.0;
    let mut l1: f64 = 0.0;
    let exact_rows = map.len().min(sampling.max_exact_rows);
    for row in &map[..exact_rows] {
        let dir = row.to_dense(d);
        let lo = lmo(set, &dir)?;
        let neg: Vec<f64> = dir.iter().map(|x| -x).collect();
        let hi = lmo(set, &neg)?;
        linf = linf.max(row.dot(hi.values()) - row.dot(lo.values()));
        images.push(apply_rows(map, lo.values()));
        images.push(apply_rows(map, hi.values()));
    }
    // 0 is an extreme point of the PSD trace ball
    if matches!(set.kind, SetKind::PsdTraceBall { .. }) {
        images.push(vec![0.0; map.len()]);
    }
    for s in 0..sampling.directions {
        let dir: Vec<f64> = if s % 2 == 0 {
            (0..d).map(|_| gaussian(rng)).collect()
        } else {
            let signs: Vec<f64> = (0..map.len())
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            let mut dir = vec![0.0; d];
            for (row, sgn) in map.iter().zip(&signs) {
                row.axpy_into(-sgn, &mut dir);
            }
            // the sign direction also yields a direct lower bound on D_1
            let lo = lmo(set, &dir)?;
            let neg: Vec<f64> = dir.iter().map(|x| -x).collect();
            let hi = lmo(set, &neg)?;
            let (a, b) = (apply_rows(map, lo.values()), apply_rows(map, hi.values()));
            l1 = l1.max(pair_norms(&a, &b).0);
            images.push(a);
            images.push(b);
            continue;
        };
        images.push(apply_rows(map, lmo(set, &dir)?.values()));
    }
    let (pl1, plinf) = best_pairs(&images);
    Ok(MapDiameters {
        l1: l1.max(pl1),
        linf: linf.max(plinf),
        exact: false,
    })
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
