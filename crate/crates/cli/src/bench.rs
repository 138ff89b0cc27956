use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::AtomicBool;

use anyhow::{Context, Result};
use hsag::oracles::DiameterSampling;
use hsag::problems::{
    build_kmeans_sdp, build_matrix_completion_box, build_matrix_completion_l1, build_sparsest_cut,
    build_synthetic_sdp, load_graph, load_ratings_split, planted_clusters, squared_distances,
};
use hsag::solver::{
    long_run_reference, run_interruptible, theory_bound, theory_constants, SolverState,
};
use hsag::{IterateTrace, ProblemInstance, SolverConfig, Variant};
use rayon::prelude::*;

use crate::config::{AlgoRun, PointSource, ProblemSpec, RunSpec, TheoryMode};
use crate::output::{
    checkpoints, epochs, slopes, trace_file_name, write_trace, AlgoSummary, FinalMetrics, ReferenceInfo,
    RunSummary, Samples, Summary, TheoryCurve, SCHEMA_VERSION,
};
use crate::{solver_exit_code, CliError};

/// Largest instance for which theory curves are computed in auto mode.
pub const THEORY_AUTO_MAX_DIM: usize = 2500;

/// Reads one point per line, coordinates separated by whitespace or
/// commas; `#` starts a comment.
pub fn load_points(path: &Path) -> Result<Vec<Vec<f64>>> {
    let file = File::open(path).map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut points: Vec<Vec<f64>> = Vec::new();
    for (no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::Data(e.to_string()))?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let coords = body
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| CliError::Data(format!("{}:{}: expected finite numbers", path.display(), no + 1)))?;
        if let Some(first) = points.first() {
            if first.len() != coords.len() {
                return Err(CliError::Data(format!(
                    "{}:{}: expected {} coordinates, found {}",
                    path.display(),
                    no + 1,
                    first.len(),
                    coords.len()
                ))
                .into());
            }
        }
        points.push(coords);
    }
    if points.len() < 2 {
        return Err(CliError::Data(format!("{}: need at least two points", path.display())).into());
    }
    Ok(points)
}

pub fn build_instance(problem: &ProblemSpec) -> Result<ProblemInstance> {
    let inst = match problem {
        ProblemSpec::Synthetic { p, m, seed } => build_synthetic_sdp(*p, *m, *seed)?,
        ProblemSpec::McBox {
            data,
            test_data,
            zeta,
            mode,
        } => {
            let ratings = load_ratings_split(data, test_data.as_ref())
                .with_context(|| format!("loading ratings from {}", data.display()))?;
            build_matrix_completion_box(&ratings, *zeta, *mode)?
        }
        ProblemSpec::McL1 {
            data,
            test_data,
            zeta,
            lambda,
        } => {
            let ratings = load_ratings_split(data, test_data.as_ref())
                .with_context(|| format!("loading ratings from {}", data.display()))?;
            build_matrix_completion_l1(&ratings, *zeta, *lambda)?
        }
        ProblemSpec::Kmeans {
            points,
            trace,
            normalize,
        } => {
            let pts = match points {
                PointSource::File(path) => load_points(path)?,
                PointSource::Planted {
                    clusters,
                    per_cluster,
                    dim,
                    separation,
                    seed,
                } => planted_clusters(*clusters, *per_cluster, *dim, *separation, *seed),
            };
            let p = pts.len();
            let mut cost = squared_distances(&pts);
            if *normalize {
                let top = cost.iter().cloned().fold(0.0, f64::max);
                if top > 0.0 {
                    cost.iter_mut().for_each(|c| *c /= top);
                }
            }
            build_kmeans_sdp(&cost, p, trace.value(p))?
        }
        ProblemSpec::SparsestCut { data } => {
            let graph = load_graph(data).with_context(|| format!("loading graph from {}", data.display()))?;
            build_sparsest_cut(&graph)?
        }
    };
    Ok(inst)
}

fn solver_config(algo: &AlgoRun, seed: u64) -> SolverConfig {
    SolverConfig::new(algo.variant, algo.beta0, algo.iters)
        .with_seed(seed)
        .with_batches(algo.batch_f, algo.batch_g)
        .with_log(algo.log)
        .with_diagnostics(algo.diagnostics)
}

fn thread_count() -> Option<usize> {
    std::env::var("HSAG_THREADS").ok()?.trim().parse::<usize>().ok().filter(|&n| n > 0)
}

struct JobResult {
    algo: usize,
    seed: u64,
    trace: IterateTrace,
    file: Option<String>,
    error: Option<(String, i32)>,
}

fn run_job(spec: &RunSpec, inst: &ProblemInstance, algo_idx: usize, seed: u64) -> JobResult {
    let algo = &spec.algos[algo_idx];
    let cfg = solver_config(algo, seed);
    let stop = AtomicBool::new(false);
    let (trace, failure) = run_interruptible(inst, &cfg, &stop);
    let mut error = failure.map(|e| (e.to_string(), solver_exit_code(&e)));
    let mut file = None;
    if !trace.rows.is_empty() {
        let name = trace_file_name(algo.variant.name(), seed, spec.format);
        let written = File::create(spec.out.join(&name)).and_then(|f| {
            let mut w = BufWriter::new(f);
            write_trace(&mut w, &trace.rows, spec.format)?;
            w.flush()
        });
        match written {
            Ok(()) => file = Some(name),
            Err(e) if error.is_none() => error = Some((format!("writing {name}: {e}"), crate::EXIT_CONFIG)),
            Err(_) => {}
        }
    }
    JobResult {
        algo: algo_idx,
        seed,
        trace,
        file,
        error,
    }
}

fn theory_curve(inst: &ProblemInstance, algo: &AlgoRun, ks: &[usize]) -> Option<TheoryCurve> {
    let cfg = solver_config(algo, 0);
    let w1 = SolverState::new(inst, &cfg).ok()?.w;
    let tc = theory_constants(inst, w1.values(), algo.beta0, DiameterSampling::default(), 0).ok()?;
    let variant = match algo.variant {
        Variant::ExactHcgm => Variant::V1,
        v => v,
    };
    Some(TheoryCurve {
        diameters_exact: tc.diameters_exact,
        points: ks.iter().filter(|&&k| k >= 1).map(|&k| theory_bound(&tc, k, variant)).collect(),
        constants: tc,
    })
}

/// Builds the instance, runs every `(algo, seed)` pair, writes one trace
/// per run plus `summary.json`. Per-run failures are recorded in the
/// summary rather than returned.
pub fn run_benchmark(spec: &RunSpec) -> Result<Summary> {
    fs::create_dir_all(&spec.out)
        .map_err(|e| CliError::Config(format!("cannot create output dir {}: {e}", spec.out.display())))?;
    let mut inst = build_instance(&spec.problem)?;

    if let (Some(iters), None) = (spec.reference_iters, inst.reference_value()) {
        let beta0 = spec
            .algos
            .iter()
            .find(|a| a.variant == Variant::ExactHcgm)
            .unwrap_or(&spec.algos[0])
            .beta0;
        inst.reference = Some(long_run_reference(&inst, beta0, iters)?);
    }

    let jobs: Vec<(usize, u64)> = (0..spec.algos.len())
        .flat_map(|a| spec.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("building thread pool")?;
    let results: Vec<JobResult> =
        pool.install(|| jobs.par_iter().map(|&(a, s)| run_job(spec, &inst, a, s)).collect());

    let m = inst.nonsmooth().m();
    let runs = results
        .iter()
        .map(|r| {
            let final_metrics = r.trace.rows.last().map(|last| FinalMetrics {
                k: last.k,
                wall_ms: last.wall_ms,
                f_value: last.f_value,
                objective_value: last.objective_value,
                rel_subopt: last.rel_subopt,
                infeas_dist: last.infeas_dist,
                f_samples: last.f_samples,
                g_samples: last.g_samples,
                g_epochs: epochs(last.g_samples as f64, m),
                test_rmse: inst.test_data.as_ref().and_then(|h| h.rmse(r.trace.final_point.values())),
            });
            RunSummary {
                algo: spec.algos[r.algo].variant.name().to_string(),
                seed: r.seed,
                trace_file: r.file.clone(),
                status: if r.error.is_none() { "ok" } else { "failed" },
                error: r.error.as_ref().map(|e| e.0.clone()),
                exit_code: r.error.as_ref().map(|e| e.1),
                final_metrics,
            }
        })
        .collect();

    let theory_on = match spec.theory {
        TheoryMode::On => true,
        TheoryMode::Off => false,
        TheoryMode::Auto => inst.dim() <= THEORY_AUTO_MAX_DIM,
    };
    let algorithms = spec
        .algos
        .iter()
        .enumerate()
        .map(|(idx, algo)| {
            let done: Vec<&IterateTrace> = results
                .iter()
                .filter(|r| r.algo == idx && r.error.is_none())
                .map(|r| &r.trace)
                .collect();
            let cps = checkpoints(&done, m);
            let samples = (!done.is_empty()).then(|| {
                let nf = done.len() as f64;
                let g_total = done.iter().map(|t| t.last().g_samples as f64).sum::<f64>() / nf;
                Samples {
                    f_total: done.iter().map(|t| t.last().f_samples as f64).sum::<f64>() / nf,
                    g_total,
                    g_epochs: epochs(g_total, m),
                }
            });
            let ks: Vec<usize> = cps.iter().map(|c| c.k).collect();
            AlgoSummary {
                algo: algo.variant.name().to_string(),
                beta0: algo.beta0,
                iters: algo.iters,
                batch_f: algo.batch_f,
                batch_g: algo.batch_g,
                seeds: spec.seeds.clone(),
                completed_seeds: done.len(),
                slopes: slopes(&cps),
                checkpoints: cps,
                samples,
                theory: if theory_on { theory_curve(&inst, algo, &ks) } else { None },
            }
        })
        .collect();

    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        problem: spec.problem.kind().name().to_string(),
        n: inst.smooth().n(),
        m,
        dim: inst.dim(),
        format: spec.format,
        reference: inst.reference.as_ref().and_then(|r| {
            r.value.map(|value| ReferenceInfo {
                value,
                source: r.source,
            })
        }),
        runs,
        algorithms,
    };
    let path = spec.out.join("summary.json");
    let f = File::create(&path).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, &summary).context("serializing summary")?;
    writeln!(w).and_then(|_| w.flush()).context("writing summary")?;
    Ok(summary)
}
