//! Instance builders and data loaders.
//!
//! Matrix variables are stored row-major; entry `(i, j)` of a `rows x cols`
//! matrix lives at index `i * cols + j`. Constraint rows over symmetric
//! variables split off-diagonal coefficients evenly between `(i, j)` and
//! `(j, i)`, so every gradient handed to the LMO stays symmetric.

mod io;

pub use io::{load_graph, load_ratings, load_ratings_split, GraphData, RatingsData};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    DecisionVar, HeldOut, Layout, LinearFunctional, NonSmoothKind, NonSmoothTerm, ProblemInstance, ReferenceSolution,
    ReferenceSource, ScalarLoss, SmoothTerm,
};
use crate::oracles::FeasibleSetSpec;
use crate::prox::{ScalarProxDescriptor, VectorProxDescriptor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxMode {
    /// Whole-vector box indicator, for V1 and the exact baseline.
    ProxV1,
    /// Product of scalar intervals, for V2.
    SeparableV2,
}

fn completion_smooth(data: &RatingsData) -> Result<SmoothTerm> {
    if data.train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = data.train.len();
    let nf = n as f64;
    let rows = data
        .train
        .iter()
        .map(|&(u, i, _)| LinearFunctional::coordinate(u * data.items + i))
        .collect();
    let losses = data
        .train
        .iter()
        .map(|&(_, _, r)| ScalarLoss::Squared { target: r, weight: nf })
        .collect();
    SmoothTerm::new(rows, losses, 2.0 * nf)
}

fn completion_instance(data: &RatingsData, zeta: f64, g: NonSmoothTerm) -> Result<ProblemInstance> {
    if !(zeta > 0.0) {
        return Err(Error::InvalidParameter(format!("nuclear radius must be positive, got {zeta}")));
    }
    let set = FeasibleSetSpec::nuclear_ball(zeta, data.users, data.items)?;
    let mut inst = ProblemInstance::new(completion_smooth(data)?, g, set)?;
    if !data.test.is_empty() {
        inst.test_data = Some(HeldOut {
            entries: data.test.iter().map(|&(u, i, r)| (u * data.items + i, r)).collect(),
        });
    }
    Ok(inst)
}

fn identity_map(d: usize) -> Vec<LinearFunctional> {
    (0..d).map(LinearFunctional::coordinate).collect()
}

/// `min sum_{Omega} (w_ij - X_ij)^2` over `||w||_* <= zeta` subject to
/// `1 <= w <= 5` entrywise.
pub fn build_matrix_completion_box(data: &RatingsData, zeta: f64, mode: BoxMode) -> Result<ProblemInstance> {
    let d = data.users * data.items;
    let kind = match mode {
        BoxMode::ProxV1 => NonSmoothKind::ProxFriendly(VectorProxDescriptor::Box { lo: 1.0, hi: 5.0 }),
        BoxMode::SeparableV2 => {
            NonSmoothKind::Separable(vec![ScalarProxDescriptor::IndicatorInterval { lo: 1.0, hi: 5.0 }; d])
        }
    };
    completion_instance(data, zeta, NonSmoothTerm::new(kind, identity_map(d), None)?)
}

/// `min sum_{Omega} (w_ij - X_ij)^2 + lambda ||w||_1` over `||w||_* <= zeta`.
pub fn build_matrix_completion_l1(data: &RatingsData, zeta: f64, lambda: f64) -> Result<ProblemInstance> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let d = data.users * data.items;
    let g = NonSmoothTerm::new(
        NonSmoothKind::ProxFriendly(VectorProxDescriptor::L1(lambda)),
        identity_map(d),
        Some(lambda * (d as f64).sqrt()),
    )?;
    completion_instance(data, zeta, g)
}

/// Choice of the trace bound for the k-means relaxation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KmeansTrace {
    /// `Tr(w) <= k`, the number of clusters.
    Clusters(usize),
    /// `Tr(w) <= 1/p`.
    InversePoints,
    Explicit(f64),
}

impl KmeansTrace {
    pub fn value(self, p: usize) -> f64 {
        match self {
            KmeansTrace::Clusters(k) => k as f64,
            KmeansTrace::InversePoints => 1.0 / p as f64,
            KmeansTrace::Explicit(t) => t,
        }
    }
}

/// Squared Euclidean distance matrix, row-major.
pub fn squared_distances(points: &[Vec<f64>]) -> Vec<f64> {
    let p = points.len();
    let mut c = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            c[i * p + j] = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum();
        }
    }
    c
}

/// `clusters` Gaussian blobs of `per_cluster` points in `dim` dimensions,
/// centers spaced `separation` apart along the axes.
pub fn planted_clusters(clusters: usize, per_cluster: usize, dim: usize, separation: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(clusters * per_cluster);
    for c in 0..clusters {
        for _ in 0..per_cluster {
            out.push(
                (0..dim)
                    .map(|j| {
                        let center = if j == c % dim { separation * (1 + c / dim) as f64 } else { 0.0 };
                        center + rng.random_range(-0.5..0.5)
                    })
                    .collect(),
            );
        }
    }
    out
}

fn check_symmetric(c: &[f64], p: usize) -> Result<()> {
    if c.len() != p * p {
        return Err(Error::DimensionMismatch {
            expected: p * p,
            got: c.len(),
        });
    }
    for i in 0..p {
        for j in 0..i {
            if c[i * p + j] != c[j * p + i] {
                return Err(Error::InvalidParameter(format!("cost matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cost matrix"));
    }
    Ok(())
}

fn linear_objective(p: usize, c: &[f64]) -> Result<SmoothTerm> {
    SmoothTerm::new(
        vec![LinearFunctional::from_dense(c)?],
        vec![ScalarLoss::Linear { slope: 1.0 }],
        0.0,
    )
    .map_err(|e| match e {
        Error::IndexOutOfRange { .. } => Error::DimensionMismatch { expected: p * p, got: c.len() },
        other => other,
    })
}

/// Coefficients of the symmetric entry `(i, j)`.
fn sym_entry(p: usize, i: usize, j: usize, coeff: f64) -> Vec<(usize, f64)> {
    if i == j {
        vec![(i * p + i, coeff)]
    } else {
        vec![(i * p + j, 0.5 * coeff), (j * p + i, 0.5 * coeff)]
    }
}

/// `min <C, w>` s.t. `w 1 = 1`, `w >= 0` over `{w PSD, Tr(w) <= tau}`.
/// Rows: `p` row sums first, then the `p^2` entries in row-major order.
pub fn build_kmeans_sdp(cost: &[f64], p: usize, tau: f64) -> Result<ProblemInstance> {
    check_symmetric(cost, p)?;
    let mut map = Vec::with_capacity(p + p * p);
    let mut comps = Vec::with_capacity(p + p * p);
    for i in 0..p {
        map.push(LinearFunctional::accumulate((0..p).flat_map(|j| sym_entry(p, i, j, 1.0)))?);
        comps.push(ScalarProxDescriptor::IndicatorPoint(1.0));
    }
    for i in 0..p {
        for j in 0..p {
            map.push(LinearFunctional::accumulate(sym_entry(p, i, j, 1.0))?);
            comps.push(ScalarProxDescriptor::IndicatorInterval {
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
    }
    let g = NonSmoothTerm::new(NonSmoothKind::Separable(comps), map, None)?;
    ProblemInstance::new(linear_objective(p, cost)?, g, FeasibleSetSpec::psd_trace_ball(tau, p)?)
}

/// Ordered pairwise-distinct triples in lexicographic order.
pub fn ordered_triples(p: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..p).flat_map(move |i| {
        (0..p).flat_map(move |j| (0..p).filter(move |&k| i != j && j != k && i != k).map(move |k| (i, j, k)))
    })
}

/// `min <L, w>` over `{w PSD, Tr(w) <= p}` s.t. `p Tr(w) - 1^T w 1 = p^2/2`
/// and `w_ij + w_jk - w_ik - w_jj <= 0` for all ordered distinct triples.
/// Row 0 is the balance equality; triangle rows follow in triple order.
pub fn build_sparsest_cut(graph: &GraphData) -> Result<ProblemInstance> {
    let p = graph.p;
    if p < 3 {
        return Err(Error::InvalidParameter(format!("sparsest cut needs p >= 3, got {p}")));
    }
    let pf = p as f64;
    let t = p * (p - 1) * (p - 2);
    let mut map = Vec::with_capacity(1 + t);
    let mut comps = Vec::with_capacity(1 + t);
    let balance = (0..p).flat_map(|i| (0..p).map(move |j| (i * p + j, if i == j { pf - 1.0 } else { -1.0 })));
    map.push(LinearFunctional::accumulate(balance)?);
    comps.push(ScalarProxDescriptor::IndicatorPoint(pf * pf / 2.0));
    for (i, j, k) in ordered_triples(p) {
        let entries = sym_entry(p, i, j, 1.0)
            .into_iter()
            .chain(sym_entry(p, j, k, 1.0))
            .chain(sym_entry(p, i, k, -1.0))
            .chain(sym_entry(p, j, j, -1.0));
        map.push(LinearFunctional::accumulate(entries)?);
        comps.push(ScalarProxDescriptor::IndicatorHalfline(0.0));
    }
    let g = NonSmoothTerm::new(NonSmoothKind::Separable(comps), map, None)?;
    ProblemInstance::new(
        linear_objective(p, &graph.laplacian)?,
        g,
        FeasibleSetSpec::psd_trace_ball(pf, p)?,
    )
}

fn uniform_symmetric(rng: &mut ChaCha8Rng, p: usize) -> Result<LinearFunctional> {
    let dense: Vec<f64> = (0..p * p).map(|_| rng.random_range(0.0..1.0)).collect();
    LinearFunctional::symmetric_inner(p, &dense)
}

fn unit_gaussian(rng: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    let mut q: Vec<f64> = (0..p)
        .map(|_| {
            let u1: f64 = rng.random_range(f64::EPSILON..1.0);
            let u2: f64 = rng.random_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        })
        .collect();
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    q.iter_mut().for_each(|v| *v /= n);
    q
}

/// Trace of the planted point relative to the trace bound.
pub const PLANTED_TRACE_FRACTION: f64 = 0.9;

/// Random SDP `min <C, w>` s.t. `<A_i, w> = b_i` over `{w PSD, Tr(w) <= 1}`
/// with `b = A w_star` for a planted rank-3 `w_star` of trace 0.9. The
/// planted point is stored as the reference point with no value.
pub fn build_synthetic_sdp(p: usize, m: usize, seed: u64) -> Result<ProblemInstance> {
    if p < 2 || m < 1 {
        return Err(Error::InvalidParameter(format!("need p >= 2 and m >= 1, got p = {p}, m = {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = 1.0;
    let c = uniform_symmetric(&mut rng, p)?;
    let rows: Vec<LinearFunctional> = (0..m).map(|_| uniform_symmetric(&mut rng, p)).collect::<Result<_>>()?;
    let weights: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..1.0)).collect();
    let mut planted = vec![0.0; p * p];
    for &wt in &weights {
        let q = unit_gaussian(&mut rng, p);
        for i in 0..p {
            for j in 0..p {
                planted[i * p + j] += wt * q[i] * q[j];
            }
        }
    }
    let trace: f64 = (0..p).map(|i| planted[i * p + i]).sum();
    let scale = PLANTED_TRACE_FRACTION * tau / trace;
    planted.iter_mut().for_each(|v| *v *= scale);
    // exact symmetry after rounding
    for i in 0..p {
        for j in 0..i {
            planted[j * p + i] = planted[i * p + j];
        }
    }
    let w_star = DecisionVar::new(Layout::Symmetric(p), planted)?;
    let comps = rows
        .iter()
        .map(|r| ScalarProxDescriptor::IndicatorPoint(r.dot(w_star.values())))
        .collect();
    let g = NonSmoothTerm::new(NonSmoothKind::Separable(comps), rows, None)?;
    let smooth = SmoothTerm::new(vec![c], vec![ScalarLoss::Linear { slope: 1.0 }], 0.0)?;
    Ok(
        ProblemInstance::new(smooth, g, FeasibleSetSpec::psd_trace_ball(tau, p)?)?.with_reference(ReferenceSolution {
            point: Some(w_star),
            value: None,
            source: ReferenceSource::Planted,
        }),
    )
}
