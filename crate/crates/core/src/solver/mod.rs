//! The homotopy conditional gradient loop.
//!
//! Each step `k = 1, 2, ...` computes `eta_k = 2/(k+1)` and
//! `beta_k = beta0/sqrt(k+1)`, refreshes the gradient estimate of the
//! smoothed surrogate `F_{beta_k}`, calls the LMO and moves
//! `w <- w + eta_k (s - w)`.

mod appendix;
mod theory;

pub use appendix::{recurrence_check, verify_appendix_sums, AppendixMode, AppendixSum, RecurrenceCheck};
pub use theory::{theory_bound, theory_constants, TheoryBound, TheoryConstants};

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{grad_g_full, smooth_grad_full, SagFState, SagGState};
use crate::model::{objective, DecisionVar, ProblemInstance, ReferenceSolution, ReferenceSource};
use crate::oracles::lmo;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// SAG for `f`, full smoothed gradient for `g`.
    #[serde(rename = "v1")]
    V1,
    /// SAG for `f` and for a separable `g`.
    #[serde(rename = "v2")]
    V2,
    /// Deterministic baseline: exact gradient of `F_{beta_k}`.
    #[serde(rename = "hcgm")]
    ExactHcgm,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::V1 => "v1",
            Variant::V2 => "v2",
            Variant::ExactHcgm => "hcgm",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "v1" => Ok(Variant::V1),
            "v2" => Ok(Variant::V2),
            "hcgm" | "exact" | "exacthcgm" => Ok(Variant::ExactHcgm),
            other => Err(Error::InvalidParameter(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Which iterations produce a trace row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogSchedule {
    /// Every `n`-th iteration.
    Every(usize),
    /// `1..=10, 20, 30, ..., 100, 200, ...`.
    Geometric,
}

impl LogSchedule {
    pub fn logs(self, k: usize) -> bool {
        match self {
            LogSchedule::Every(n) => n > 0 && k % n == 0,
            LogSchedule::Geometric => {
                if k == 0 {
                    return false;
                }
                let mut scale = 1usize;
                while k / scale >= 10 {
                    scale *= 10;
                }
                k % scale == 0
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub variant: Variant,
    pub beta0: f64,
    pub max_iters: usize,
    pub batch_f: usize,
    pub batch_g: usize,
    pub seed: u64,
    pub log_every: LogSchedule,
    /// Starting point; `None` means one LMO atom, `lmo(-1)`.
    pub w0: Option<DecisionVar>,
    pub compute_l1_diagnostics: bool,
}

impl SolverConfig {
    pub fn new(variant: Variant, beta0: f64, max_iters: usize) -> Self {
        SolverConfig {
            variant,
            beta0,
            max_iters,
            batch_f: 1,
            batch_g: 1,
            seed: 0,
            log_every: LogSchedule::Geometric,
            w0: None,
            compute_l1_diagnostics: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_batches(mut self, batch_f: usize, batch_g: usize) -> Self {
        self.batch_f = batch_f;
        self.batch_g = batch_g;
        self
    }

    pub fn with_log(mut self, log_every: LogSchedule) -> Self {
        self.log_every = log_every;
        self
    }

    pub fn with_w0(mut self, w0: DecisionVar) -> Self {
        self.w0 = Some(w0);
        self
    }

    pub fn with_diagnostics(mut self, on: bool) -> Self {
        self.compute_l1_diagnostics = on;
        self
    }

    /// Checks the configuration against an instance.
    pub fn validate(&self, inst: &ProblemInstance) -> Result<()> {
        if !(self.beta0 > 0.0 && self.beta0.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta0 must be positive, got {}", self.beta0)));
        }
        if self.batch_f == 0 || self.batch_g == 0 {
            return Err(Error::InvalidParameter("batch sizes must be at least 1".into()));
        }
        if self.log_every == LogSchedule::Every(0) {
            return Err(Error::InvalidParameter("log_every must be at least 1".into()));
        }
        if self.variant == Variant::V2 && !inst.nonsmooth().is_separable() {
            return Err(Error::NotSeparable);
        }
        if let Some(w0) = &self.w0 {
            if w0.dim() != inst.dim() {
                return Err(Error::DimensionMismatch {
                    expected: inst.dim(),
                    got: w0.dim(),
                });
            }
            if w0.values().iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("w0"));
            }
            if let Some(viol) = inst.feasible_set().membership_violation(w0.values()) {
                if viol > 1e-9 {
                    return Err(Error::InvalidParameter(format!("w0 lies outside the feasible set by {viol:e}")));
                }
            }
        }
        Ok(())
    }
}

/// `(eta_k, beta_k) = (2/(k+1), beta0/sqrt(k+1))`.
pub fn schedules(k: usize, beta0: f64) -> Result<(f64, f64)> {
    if k < 1 {
        return Err(Error::InvalidParameter("iteration counter starts at 1".into()));
    }
    let kp1 = (k + 1) as f64;
    Ok((2.0 / kp1, beta0 / kp1.sqrt()))
}

/// Mutable state of one run.
#[derive(Debug, Clone)]
pub struct SolverState {
    /// Index of the next step.
    pub k: usize,
    pub w: DecisionVar,
    pub sag_f: SagFState,
    pub sag_g: Option<SagGState>,
    pub eta_k: f64,
    pub beta_k: f64,
    pub f_samples: u64,
    pub g_samples: u64,
    /// Estimator errors measured at `w_k` during the last step.
    pub l1_err_f: Option<f64>,
    pub l1_err_g: Option<f64>,
    poisoned: bool,
    rng_f: ChaCha8Rng,
    rng_g: ChaCha8Rng,
    batch: Vec<usize>,
}

impl SolverState {
    pub fn new(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate(inst)?;
        let d = inst.dim();
        let w = match &cfg.w0 {
            Some(w0) => w0.clone(),
            None => lmo(inst.feasible_set(), &vec![-1.0; d])?,
        };
        let mut rng_f = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng_f.set_stream(0);
        let mut rng_g = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng_g.set_stream(1);
        let sag_g = (cfg.variant == Variant::V2).then(|| SagGState::new(inst.nonsmooth().m(), d));
        Ok(SolverState {
            k: 1,
            w,
            sag_f: SagFState::new(inst.smooth().n(), d),
            sag_g,
            eta_k: f64::NAN,
            beta_k: cfg.beta0,
            f_samples: 0,
            g_samples: 0,
            l1_err_f: None,
            l1_err_g: None,
            poisoned: false,
            rng_f,
            rng_g,
            batch: Vec::new(),
        })
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned
    }

    fn draw(rng: &mut ChaCha8Rng, batch: &mut Vec<usize>, size: usize, len: usize) {
        batch.clear();
        batch.extend((0..size).map(|_| rng.random_range(0..len)));
    }
}

/// Performs one iteration in place; `state.k` advances by one.
pub fn step(state: &mut SolverState, inst: &ProblemInstance, cfg: &SolverConfig) -> Result<()> {
    step_inner(state, inst, cfg, cfg.compute_l1_diagnostics)
}

fn step_inner(state: &mut SolverState, inst: &ProblemInstance, cfg: &SolverConfig, diagnostics: bool) -> Result<()> {
    let k = state.k;
    if state.poisoned {
        return Err(Error::Poisoned {
            k,
            reason: "state was poisoned by an earlier step".into(),
        });
    }
    let (eta, beta) = schedules(k, cfg.beta0)?;
    state.eta_k = eta;
    state.beta_k = beta;
    let smooth = inst.smooth();
    let nonsmooth = inst.nonsmooth();
    let w = state.w.values();

    let v: Vec<f64> = match cfg.variant {
        Variant::ExactHcgm => {
            let vf = smooth_grad_full(smooth, w);
            let vg = grad_g_full(nonsmooth, w, beta)?;
            state.f_samples += smooth.n() as u64;
            state.g_samples += nonsmooth.m() as u64;
            state.l1_err_f = None;
            state.l1_err_g = None;
            vf.iter().zip(&vg).map(|(a, b)| a + b).collect()
        }
        Variant::V1 | Variant::V2 => {
            SolverState::draw(&mut state.rng_f, &mut state.batch, cfg.batch_f, smooth.n());
            state.sag_f.update(w, &state.batch, smooth)?;
            state.f_samples += cfg.batch_f as u64;
            state.l1_err_f = diagnostics.then(|| state.sag_f.error_l1(w, smooth));
            let vg: Vec<f64> = if cfg.variant == Variant::V1 {
                state.g_samples += nonsmooth.m() as u64;
                state.l1_err_g = None;
                grad_g_full(nonsmooth, w, beta)?
            } else {
                let sag_g = state.sag_g.as_mut().ok_or(Error::NotSeparable)?;
                if nonsmooth.m() > 0 {
                    SolverState::draw(&mut state.rng_g, &mut state.batch, cfg.batch_g, nonsmooth.m());
                    sag_g.update(w, &state.batch, nonsmooth, beta)?;
                    state.g_samples += cfg.batch_g as u64;
                }
                state.l1_err_g = if diagnostics {
                    Some(sag_g.error_l1(w, nonsmooth, beta)?)
                } else {
                    None
                };
                sag_g.aggregate().to_vec()
            };
            state.sag_f.aggregate().iter().zip(&vg).map(|(a, b)| a + b).collect()
        }
    };

    if let Some(pos) = v.iter().position(|x| !x.is_finite()) {
        state.poisoned = true;
        return Err(Error::Poisoned {
            k,
            reason: format!("non-finite gradient estimate at coordinate {pos}"),
        });
    }
    let s = match lmo(inst.feasible_set(), &v) {
        Ok(s) => s,
        Err(e) => {
            state.poisoned = matches!(e, Error::NonFinite(_));
            return Err(e);
        }
    };
    state.w.move_towards(s.values(), eta);
    state.k += 1;
    Ok(())
}

/// One logged iteration. Row `k >= 1` describes `w_{k+1}`, the point
/// produced by step `k`, together with the `beta_k` and `eta_k` it used;
/// row 0 describes `w_0` with `beta0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub k: usize,
    pub wall_ms: f64,
    pub f_value: f64,
    /// `F = f + g`; `+inf` when an indicator is violated.
    pub objective_value: f64,
    pub rel_subopt: Option<f64>,
    /// `dist(Aw, K)`; present when `g` is an indicator.
    pub infeas_dist: Option<f64>,
    pub beta_k: f64,
    pub eta_k: Option<f64>,
    pub f_samples: u64,
    pub g_samples: u64,
    pub l1_err_f: Option<f64>,
    pub l1_err_g: Option<f64>,
    /// `F_{beta_k}(w) - F_star`.
    pub smoothed_gap: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct IterateTrace {
    pub variant: Variant,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub reference_source: Option<ReferenceSource>,
    pub rows: Vec<TraceRow>,
    pub final_point: DecisionVar,
}

impl IterateTrace {
    pub fn row(&self, k: usize) -> Option<&TraceRow> {
        self.rows.binary_search_by_key(&k, |r| r.k).ok().map(|i| &self.rows[i])
    }

    pub fn last(&self) -> &TraceRow {
        self.rows.last().expect("trace always holds the k = 0 row")
    }
}

/// Value that suboptimality is measured on: `f` for indicator `g`, `F`
/// otherwise.
fn comparable_value(inst: &ProblemInstance, f: f64, total: f64) -> f64 {
    if inst.nonsmooth().is_indicator() {
        f
    } else {
        total
    }
}

/// `|value - F_star| / |F_star|`, or the absolute gap when `F_star = 0`.
pub fn relative_gap(value: f64, reference: f64) -> f64 {
    let gap = (value - reference).abs();
    if reference == 0.0 {
        gap
    } else {
        gap / reference.abs()
    }
}

fn make_row(
    inst: &ProblemInstance,
    state: &SolverState,
    k: usize,
    started: Instant,
    eta: Option<f64>,
    diagnostics: bool,
) -> Result<TraceRow> {
    let obj = objective(inst, &state.w)?;
    let reference = inst.reference_value();
    let indicator = inst.nonsmooth().is_indicator();
    let z = inst.nonsmooth().apply(state.w.values());
    let smoothed_gap = match reference {
        Some(fs) => Some(inst.surrogate_value(&state.w, state.beta_k)? - fs),
        None => None,
    };
    Ok(TraceRow {
        k,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
        f_value: obj.f,
        objective_value: obj.total,
        rel_subopt: reference.map(|fs| relative_gap(comparable_value(inst, obj.f, obj.total), fs)),
        infeas_dist: indicator.then(|| inst.nonsmooth().indicator_distance(&z)),
        beta_k: state.beta_k,
        eta_k: eta,
        f_samples: state.f_samples,
        g_samples: state.g_samples,
        l1_err_f: if diagnostics { state.l1_err_f } else { None },
        l1_err_g: if diagnostics { state.l1_err_g } else { None },
        smoothed_gap,
    })
}

/// Runs `cfg.max_iters` steps and returns the trace.
pub fn run(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<IterateTrace> {
    let stop = AtomicBool::new(false);
    match run_interruptible(inst, cfg, &stop) {
        (trace, None) => Ok(trace),
        (_, Some(e)) => Err(e),
    }
}

/// Like [`run`] but checks `stop` before every step and returns whatever
/// was traced so far together with the error that ended the run, if any.
/// The final row is always the last completed iteration.
pub fn run_interruptible(
    inst: &ProblemInstance,
    cfg: &SolverConfig,
    stop: &AtomicBool,
) -> (IterateTrace, Option<Error>) {
    let started = Instant::now();
    let d = inst.dim();
    let mut trace = IterateTrace {
        variant: cfg.variant,
        seed: cfg.seed,
        n: inst.smooth().n(),
        m: inst.nonsmooth().m(),
        reference_source: inst.reference.as_ref().filter(|r| r.value.is_some()).map(|r| r.source),
        rows: Vec::new(),
        final_point: DecisionVar::zeros(inst.layout()),
    };
    let mut state = match SolverState::new(inst, cfg) {
        Ok(s) => s,
        Err(e) => return (trace, Some(e)),
    };
    debug_assert_eq!(state.w.dim(), d);
    match make_row(inst, &state, 0, started, None, false) {
        Ok(r) => trace.rows.push(r),
        Err(e) => return (trace, Some(e)),
    }
    let mut failure = None;
    let diag = cfg.compute_l1_diagnostics && cfg.variant != Variant::ExactHcgm;
    for k in 1..=cfg.max_iters {
        if stop.load(Ordering::Relaxed) {
            break;
        }
        let logged = cfg.log_every.logs(k) || k == cfg.max_iters;
        if let Err(e) = step_inner(&mut state, inst, cfg, diag && logged) {
            failure = Some(e);
            break;
        }
        if logged {
            match make_row(inst, &state, k, started, Some(state.eta_k), diag) {
                Ok(r) => trace.rows.push(r),
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
    }
    let last_done = state.k - 1;
    if failure.is_none() && trace.last().k != last_done {
        if let Ok(r) = make_row(inst, &state, last_done, started, Some(state.eta_k), false) {
            trace.rows.push(r);
        }
    }
    trace.final_point = state.w;
    (trace, failure)
}

/// Reference optimum estimated by a long deterministic run; the value is
/// `f` for indicator `g` and `F` otherwise.
pub fn long_run_reference(inst: &ProblemInstance, beta0: f64, iters: usize) -> Result<ReferenceSolution> {
    let cfg = SolverConfig::new(Variant::ExactHcgm, beta0, iters).with_log(LogSchedule::Every(usize::MAX));
    let trace = run(inst, &cfg)?;
    let last = trace.last();
    let value = if inst.nonsmooth().is_indicator() {
        last.f_value
    } else {
        last.objective_value
    };
    Ok(ReferenceSolution {
        point: Some(trace.final_point),
        value: Some(value),
        source: ReferenceSource::LongExactRun,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinearFunctional, NonSmoothKind, NonSmoothTerm, ScalarLoss, SmoothTerm};
    use crate::oracles::FeasibleSetSpec;
    use crate::prox::ScalarProxDescriptor as S;

    fn rand_rows(rng: &mut ChaCha8Rng, count: usize, d: usize) -> Vec<LinearFunctional> {
        (0..count)
            .map(|_| {
                LinearFunctional::from_dense(&(0..d).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>()).unwrap()
            })
            .collect()
    }

    fn quad(rng: &mut ChaCha8Rng, n: usize, d: usize) -> SmoothTerm {
        let losses = (0..n)
            .map(|_| ScalarLoss::Squared {
                target: rng.random_range(-1.0..1.0),
                weight: 1.0,
            })
            .collect();
        SmoothTerm::new(rand_rows(rng, n, d), losses, 2.0).unwrap()
    }

    fn psd_instance(seed: u64, n: usize, m: usize, p: usize) -> ProblemInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = p * p;
        let sym: Vec<LinearFunctional> = (0..n + m)
            .map(|_| {
                let dense: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                LinearFunctional::symmetric_inner(p, &dense).unwrap()
            })
            .collect();
        let losses = (0..n)
            .map(|_| ScalarLoss::Squared {
                target: rng.random_range(-1.0..1.0),
                weight: 1.0,
            })
            .collect();
        let smooth = SmoothTerm::new(sym[..n].to_vec(), losses, 2.0).unwrap();
        let g = NonSmoothTerm::new(
            NonSmoothKind::Separable(vec![S::IndicatorInterval { lo: -0.1, hi: 0.1 }; m]),
            sym[n..].to_vec(),
            None,
        )
        .unwrap();
        ProblemInstance::new(smooth, g, FeasibleSetSpec::psd_trace_ball(1.0, p).unwrap()).unwrap()
    }

    #[test]
    fn schedule_examples() {
        let (e, b) = schedules(1, 10.0).unwrap();
        assert_eq!(e, 1.0);
        assert!((b - 10.0 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(schedules(3, 7.0).unwrap(), (0.5, 3.5));
        assert!(schedules(0, 1.0).is_err());
        let mut prev = schedules(1, 1.0).unwrap();
        for k in 2..1000 {
            let cur = schedules(k, 1.0).unwrap();
            assert!(cur.0 < prev.0 && cur.1 < prev.1);
            prev = cur;
        }
    }

    #[test]
    fn geometric_schedule_points() {
        let logged: Vec<usize> = (0..=1000).filter(|&k| LogSchedule::Geometric.logs(k)).collect();
        let mut expected: Vec<usize> = (1..=10).collect();
        expected.extend((2..=10).map(|i| i * 10));
        expected.extend((2..=10).map(|i| i * 100));
        assert_eq!(logged, expected);
        assert!(LogSchedule::Every(5).logs(15));
        assert!(!LogSchedule::Every(5).logs(16));
    }

    #[test]
    fn zero_iterations_logs_only_w0() {
        let inst = psd_instance(1, 3, 4, 3);
        let trace = run(&inst, &SolverConfig::new(Variant::V2, 1.0, 0)).unwrap();
        assert_eq!(trace.rows.len(), 1);
        assert_eq!(trace.rows[0].k, 0);
        assert_eq!(trace.rows[0].eta_k, None);
    }

    #[test]
    fn default_w0_is_an_lmo_atom() {
        let inst = psd_instance(1, 3, 4, 3);
        let st = SolverState::new(&inst, &SolverConfig::new(Variant::V1, 1.0, 1)).unwrap();
        // lmo(-J) = tau * (1/sqrt p) 1 1^T (1/sqrt p)
        for &v in st.w.values() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn first_step_lands_on_lmo_output() {
        let inst = psd_instance(2, 3, 4, 3);
        let cfg = SolverConfig::new(Variant::ExactHcgm, 1.0, 1);
        let mut st = SolverState::new(&inst, &cfg).unwrap();
        let (_, beta1) = schedules(1, 1.0).unwrap();
        let v = crate::estimators::exact_grad(&inst, st.w.values(), beta1).unwrap();
        let s = lmo(inst.feasible_set(), &v).unwrap();
        step(&mut st, &inst, &cfg).unwrap();
        assert_eq!(st.w.values(), s.values());
        assert_eq!(st.k, 2);
    }

    #[test]
    fn exact_matches_textbook_frank_wolfe() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = 4;
        let smooth = quad(&mut rng, 6, d);
        let atoms: Vec<Vec<f64>> = (0..7)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let set = FeasibleSetSpec::atoms(atoms.clone()).unwrap();
        let inst = ProblemInstance::new(smooth.clone(), NonSmoothTerm::zero(), set).unwrap();
        let cfg = SolverConfig::new(Variant::ExactHcgm, 1.0, 50);
        let mut st = SolverState::new(&inst, &cfg).unwrap();

        let mut w = st.w.values().to_vec();
        for k in 1..=50 {
            // grad of (1/n) sum (x_i^T w - t_i)^2, assembled densely
            let mut g = vec![0.0; d];
            for (row, loss) in smooth.rows().iter().zip(smooth.losses()) {
                let dense = row.to_dense(d);
                let r: f64 = dense.iter().zip(&w).map(|(a, b)| a * b).sum();
                for j in 0..d {
                    g[j] += loss.derivative(r) * dense[j] / 6.0;
                }
            }
            let s = atoms
                .iter()
                .min_by(|a, b| {
                    let da: f64 = a.iter().zip(&g).map(|(x, y)| x * y).sum();
                    let db: f64 = b.iter().zip(&g).map(|(x, y)| x * y).sum();
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            let eta = 2.0 / (k as f64 + 1.0);
            for j in 0..d {
                w[j] += eta * (s[j] - w[j]);
            }
            step(&mut st, &inst, &cfg).unwrap();
            for (a, b) in st.w.values().iter().zip(&w) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let inst = psd_instance(4, 5, 6, 3);
        let cfg = SolverConfig::new(Variant::V2, 1.0, 300).with_seed(9).with_diagnostics(true);
        let a = run(&inst, &cfg).unwrap();
        let b = run(&inst, &cfg).unwrap();
        let strip = |t: &IterateTrace| {
            t.rows
                .iter()
                .map(|r| TraceRow { wall_ms: 0.0, ..r.clone() })
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.final_point, b.final_point);
    }

    #[test]
    fn iterates_stay_in_psd_ball() {
        let inst = psd_instance(5, 4, 8, 4);
        for variant in [Variant::V1, Variant::V2, Variant::ExactHcgm] {
            let cfg = SolverConfig::new(variant, 2.0, 200);
            let mut st = SolverState::new(&inst, &cfg).unwrap();
            for _ in 0..200 {
                step(&mut st, &inst, &cfg).unwrap();
                assert!(st.w.symmetry_defect() <= 1e-12);
                let viol = inst.feasible_set().membership_violation(st.w.values()).unwrap();
                assert!(viol <= 1e-9, "{variant}: {viol}");
            }
        }
    }

    #[test]
    fn single_sample_v1_is_exact_hcgm() {
        let inst = psd_instance(6, 1, 5, 3);
        let exact = SolverConfig::new(Variant::ExactHcgm, 3.0, 100).with_log(LogSchedule::Every(1));
        let v1 = SolverConfig { variant: Variant::V1, ..exact.clone() };
        let mut a = SolverState::new(&inst, &exact).unwrap();
        let mut b = SolverState::new(&inst, &v1).unwrap();
        for _ in 0..100 {
            step(&mut a, &inst, &exact).unwrap();
            step(&mut b, &inst, &v1).unwrap();
            assert_eq!(a.w.values(), b.w.values());
        }
    }

    #[test]
    fn v2_rejects_non_separable() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let smooth = quad(&mut rng, 2, 2);
        let set = FeasibleSetSpec::nuclear_ball(1.0, 1, 2).unwrap();
        let inst = ProblemInstance::new(smooth, NonSmoothTerm::zero(), set).unwrap();
        let cfg = SolverConfig::new(Variant::V2, 1.0, 10);
        assert!(matches!(run(&inst, &cfg), Err(Error::NotSeparable)));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let inst = psd_instance(1, 2, 2, 2);
        assert!(run(&inst, &SolverConfig::new(Variant::V1, 0.0, 1)).is_err());
        assert!(run(&inst, &SolverConfig::new(Variant::V1, 1.0, 1).with_batches(0, 1)).is_err());
        let outside = DecisionVar::new(inst.layout(), vec![2.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(run(&inst, &SolverConfig::new(Variant::V1, 1.0, 1).with_w0(outside)).is_err());
    }

    #[test]
    fn samples_are_counted_per_variant() {
        let inst = psd_instance(8, 7, 9, 3);
        let t = |v| {
            let cfg = SolverConfig::new(v, 1.0, 10).with_batches(2, 3).with_log(LogSchedule::Every(1));
            run(&inst, &cfg).unwrap()
        };
        let v1 = t(Variant::V1);
        let v2 = t(Variant::V2);
        let ex = t(Variant::ExactHcgm);
        assert_eq!((v1.last().f_samples, v1.last().g_samples), (20, 90));
        assert_eq!((v2.last().f_samples, v2.last().g_samples), (20, 30));
        assert_eq!((ex.last().f_samples, ex.last().g_samples), (70, 90));
    }

    #[test]
    fn trace_rows_are_well_formed() {
        let mut inst = psd_instance(9, 4, 6, 3);
        inst.reference = Some(ReferenceSolution {
            point: None,
            value: Some(0.5),
            source: ReferenceSource::External,
        });
        let cfg = SolverConfig::new(Variant::V2, 1.0, 137).with_diagnostics(true);
        let tr = run(&inst, &cfg).unwrap();
        assert!(tr.rows.windows(2).all(|w| w[0].k < w[1].k));
        assert_eq!(tr.last().k, 137);
        assert_eq!(tr.reference_source, Some(ReferenceSource::External));
        for r in &tr.rows {
            assert!(r.infeas_dist.unwrap() >= 0.0);
            assert!(r.rel_subopt.is_some() && r.smoothed_gap.is_some());
            if r.k > 0 {
                let (e, b) = schedules(r.k, 1.0).unwrap();
                assert_eq!((r.eta_k, r.beta_k), (Some(e), b));
                assert!(r.l1_err_f.is_some() && r.l1_err_g.is_some());
            }
        }
    }

    #[test]
    fn interrupt_returns_partial_trace() {
        let inst = psd_instance(10, 3, 3, 3);
        let stop = AtomicBool::new(true);
        let (tr, err) = run_interruptible(&inst, &SolverConfig::new(Variant::V1, 1.0, 1000), &stop);
        assert!(err.is_none());
        assert_eq!(tr.rows.len(), 1);
    }

    #[test]
    fn non_finite_gradient_poisons_state() {
        let smooth = SmoothTerm::new(
            vec![LinearFunctional::coordinate(0)],
            vec![ScalarLoss::Squared { target: 0.0, weight: 1e308 }],
            1.0,
        )
        .unwrap();
        let set = FeasibleSetSpec::nuclear_ball(10.0, 1, 1).unwrap();
        let inst = ProblemInstance::new(smooth, NonSmoothTerm::zero(), set).unwrap();
        let cfg = SolverConfig::new(Variant::V1, 1.0, 5);
        let mut st = SolverState::new(&inst, &cfg).unwrap();
        assert!(matches!(step(&mut st, &inst, &cfg), Err(Error::Poisoned { k: 1, .. })));
        assert!(st.is_poisoned());
        assert!(step(&mut st, &inst, &cfg).is_err());
    }
}
