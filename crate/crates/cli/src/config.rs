use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::{Parser, ValueEnum};
use hsag::problems::{BoxMode, KmeansTrace};
use hsag::solver::LogSchedule;
use hsag::Variant;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Synthetic,
    McBox,
    McL1,
    Kmeans,
    SparsestCut,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Synthetic => "synthetic",
            ProblemKind::McBox => "mc-box",
            ProblemKind::McL1 => "mc-l1",
            ProblemKind::Kmeans => "kmeans",
            ProblemKind::SparsestCut => "sparsest-cut",
        }
    }

    /// Initial smoothing used when neither flag nor file sets one.
    pub fn default_beta0(self) -> f64 {
        match self {
            ProblemKind::Synthetic => 0.1,
            ProblemKind::McBox | ProblemKind::McL1 => 10.0,
            ProblemKind::Kmeans => 7.0,
            ProblemKind::SparsestCut => 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceFormat {
    Csv,
    Jsonl,
}

impl TraceFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TraceFormat::Csv => "csv",
            TraceFormat::Jsonl => "jsonl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoxModeArg {
    /// Separable whenever v2 is requested, whole-vector box otherwise.
    Auto,
    Prox,
    Separable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KmeansTraceArg {
    Clusters,
    InversePoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoryMode {
    /// On for instances with at most 2500 variables.
    Auto,
    On,
    Off,
}

#[derive(Debug, Parser, Default)]
#[command(name = "hsag", about = "Run H-SAG-CGM benchmark sweeps", version)]
pub struct Args {
    #[arg(long, value_enum)]
    pub problem: Option<ProblemKind>,
    /// Algorithm to run (v1, v2, hcgm); repeatable.
    #[arg(long = "algo")]
    pub algos: Vec<String>,
    #[arg(long)]
    pub beta0: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub batch_f: Option<usize>,
    #[arg(long)]
    pub batch_g: Option<usize>,
    /// Solver seed; repeatable.
    #[arg(long = "seed")]
    pub seeds: Vec<u64>,
    /// Nuclear-ball radius for matrix completion.
    #[arg(long)]
    pub zeta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Trace bound of the k-means set; overrides --kmeans-trace.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    /// Log every N iterations, or "geometric".
    #[arg(long)]
    pub log_every: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<TraceFormat>,
    /// Record l1 estimator errors on logged rows.
    #[arg(long)]
    pub diagnostics: bool,
    /// TOML file with the same keys; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Estimate the optimum with this many exact iterations first.
    #[arg(long)]
    pub reference_iters: Option<usize>,
    #[arg(long, value_enum)]
    pub box_mode: Option<BoxModeArg>,
    /// Matrix side for the synthetic SDP.
    #[arg(long)]
    pub size: Option<usize>,
    /// Constraint count for the synthetic SDP.
    #[arg(long)]
    pub constraints: Option<usize>,
    /// Seed for generated instances.
    #[arg(long)]
    pub instance_seed: Option<u64>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub per_cluster: Option<usize>,
    #[arg(long)]
    pub point_dim: Option<usize>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long, value_enum)]
    pub kmeans_trace: Option<KmeansTraceArg>,
    /// Divide the k-means cost matrix by its largest entry.
    #[arg(long)]
    pub normalize_cost: bool,
    #[arg(long, value_enum)]
    pub theory: Option<TheoryMode>,
}

/// Per-algorithm settings read from the `[overrides.<algo>]` tables.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgoOverride {
    pub beta0: Option<f64>,
    pub iters: Option<usize>,
    pub batch_f: Option<usize>,
    pub batch_g: Option<usize>,
    pub log_every: Option<LogEveryValue>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum LogEveryValue {
    Every(usize),
    Named(String),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub problem: Option<ProblemKind>,
    pub algo: Option<Vec<String>>,
    pub beta0: Option<f64>,
    pub iters: Option<usize>,
    pub batch_f: Option<usize>,
    pub batch_g: Option<usize>,
    pub seed: Option<Vec<u64>>,
    pub zeta: Option<f64>,
    pub lambda: Option<f64>,
    pub tau: Option<f64>,
    pub data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    pub log_every: Option<LogEveryValue>,
    pub out: Option<PathBuf>,
    pub format: Option<TraceFormat>,
    pub diagnostics: Option<bool>,
    pub reference_iters: Option<usize>,
    pub box_mode: Option<BoxModeArg>,
    pub size: Option<usize>,
    pub constraints: Option<usize>,
    pub instance_seed: Option<u64>,
    pub clusters: Option<usize>,
    pub per_cluster: Option<usize>,
    pub point_dim: Option<usize>,
    pub separation: Option<f64>,
    pub kmeans_trace: Option<KmeansTraceArg>,
    pub normalize_cost: Option<bool>,
    pub theory: Option<TheoryMode>,
    #[serde(default)]
    pub overrides: BTreeMap<String, AlgoOverride>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PointSource {
    File(PathBuf),
    Planted {
        clusters: usize,
        per_cluster: usize,
        dim: usize,
        separation: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Synthetic {
        p: usize,
        m: usize,
        seed: u64,
    },
    McBox {
        data: PathBuf,
        test_data: Option<PathBuf>,
        zeta: f64,
        mode: BoxMode,
    },
    McL1 {
        data: PathBuf,
        test_data: Option<PathBuf>,
        zeta: f64,
        lambda: f64,
    },
    Kmeans {
        points: PointSource,
        trace: KmeansTrace,
        normalize: bool,
    },
    SparsestCut {
        data: PathBuf,
    },
}

impl ProblemSpec {
    pub fn kind(&self) -> ProblemKind {
        match self {
            ProblemSpec::Synthetic { .. } => ProblemKind::Synthetic,
            ProblemSpec::McBox { .. } => ProblemKind::McBox,
            ProblemSpec::McL1 { .. } => ProblemKind::McL1,
            ProblemSpec::Kmeans { .. } => ProblemKind::Kmeans,
            ProblemSpec::SparsestCut { .. } => ProblemKind::SparsestCut,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgoRun {
    pub variant: Variant,
    pub beta0: f64,
    pub iters: usize,
    pub batch_f: usize,
    pub batch_g: usize,
    pub log: LogSchedule,
    pub diagnostics: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub problem: ProblemSpec,
    pub algos: Vec<AlgoRun>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub format: TraceFormat,
    pub reference_iters: Option<usize>,
    pub theory: TheoryMode,
}

pub const DEFAULT_ITERS: usize = 10_000;

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    CliError::Config(msg.into()).into()
}

fn parse_log_every(v: &LogEveryValue) -> Result<LogSchedule> {
    match v {
        LogEveryValue::Every(0) => Err(config_err("log_every must be positive")),
        LogEveryValue::Every(n) => Ok(LogSchedule::Every(*n)),
        LogEveryValue::Named(s) if s.eq_ignore_ascii_case("geometric") => Ok(LogSchedule::Geometric),
        LogEveryValue::Named(s) => match s.parse::<usize>() {
            Ok(n) => parse_log_every(&LogEveryValue::Every(n)),
            Err(_) => Err(config_err(format!("log_every must be a positive integer or 'geometric', got '{s}'"))),
        },
    }
}

fn read_file_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_err(format!("invalid config {}: {e}", path.display())))
}

/// Parses flags and the optional `--config` file into a validated spec.
/// Flags override file values; per-algorithm file overrides sit between
/// the two.
pub fn parse_config<I, T>(argv: I) -> Result<RunSpec>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => return Err(config_err(e.to_string())),
    };
    let file = match &args.config {
        Some(p) => read_file_config(p)?,
        None => FileConfig::default(),
    };
    resolve(args, file)
}

/// Merges flags over file values and validates the result.
pub fn resolve(args: Args, file: FileConfig) -> Result<RunSpec> {
    let kind = args
        .problem
        .or(file.problem)
        .ok_or_else(|| config_err("--problem is required"))?;

    let algo_names = if args.algos.is_empty() {
        file.algo.clone().unwrap_or_default()
    } else {
        args.algos.clone()
    };
    if algo_names.is_empty() {
        return Err(config_err("at least one --algo is required"));
    }
    let variants = algo_names
        .iter()
        .map(|s| s.parse::<Variant>().map_err(|e| config_err(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut seen = Vec::new();
    for v in &variants {
        if seen.contains(v) {
            return Err(config_err(format!("algorithm '{v}' listed twice")));
        }
        seen.push(*v);
    }
    for name in file.overrides.keys() {
        let v: Variant = name.parse().map_err(|e: hsag::Error| config_err(e.to_string()))?;
        if !variants.contains(&v) {
            return Err(config_err(format!("overrides given for '{name}', which is not run")));
        }
    }

    let seeds = if !args.seeds.is_empty() {
        args.seeds.clone()
    } else {
        file.seed.clone().unwrap_or_else(|| vec![0])
    };
    if seeds.is_empty() {
        return Err(config_err("at least one seed is required"));
    }
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != seeds.len() {
        return Err(config_err("seeds must be distinct"));
    }

    let data = args.data.clone().or(file.data.clone());
    let test_data = args.test_data.clone().or(file.test_data.clone());
    let need_data = || data.clone().ok_or(CliError::MissingData { problem: kind.name() });
    let need_zeta = || {
        args.zeta
            .or(file.zeta)
            .ok_or_else(|| config_err(format!("problem '{}' needs --zeta", kind.name())))
    };
    let has_v2 = variants.contains(&Variant::V2);
    let problem = match kind {
        ProblemKind::Synthetic => ProblemSpec::Synthetic {
            p: args.size.or(file.size).unwrap_or(20),
            m: args.constraints.or(file.constraints).unwrap_or(100),
            seed: args.instance_seed.or(file.instance_seed).unwrap_or(0),
        },
        ProblemKind::McBox => {
            let data = need_data()?;
            let mode = match args.box_mode.or(file.box_mode).unwrap_or(BoxModeArg::Auto) {
                BoxModeArg::Prox => BoxMode::ProxV1,
                BoxModeArg::Separable => BoxMode::SeparableV2,
                BoxModeArg::Auto if has_v2 => BoxMode::SeparableV2,
                BoxModeArg::Auto => BoxMode::ProxV1,
            };
            if has_v2 && mode == BoxMode::ProxV1 {
                return Err(CliError::Conflict(
                    "algorithm v2 needs a separable constraint term, but mc-box was set to box mode 'prox'; use --box-mode separable".into(),
                )
                .into());
            }
            ProblemSpec::McBox {
                data,
                test_data,
                zeta: need_zeta()?,
                mode,
            }
        }
        ProblemKind::McL1 => {
            let data = need_data()?;
            if has_v2 {
                return Err(CliError::Conflict(
                    "algorithm v2 needs a separable non-smooth term, but mc-l1 uses the whole-vector l1 prox".into(),
                )
                .into());
            }
            ProblemSpec::McL1 {
                data,
                test_data,
                zeta: need_zeta()?,
                lambda: args.lambda.or(file.lambda).unwrap_or(0.1),
            }
        }
        ProblemKind::Kmeans => {
            let clusters = args.clusters.or(file.clusters).unwrap_or(3);
            let points = match data {
                Some(path) => PointSource::File(path),
                None => PointSource::Planted {
                    clusters,
                    per_cluster: args.per_cluster.or(file.per_cluster).unwrap_or(4),
                    dim: args.point_dim.or(file.point_dim).unwrap_or(3),
                    separation: args.separation.or(file.separation).unwrap_or(1.5),
                    seed: args.instance_seed.or(file.instance_seed).unwrap_or(0),
                },
            };
            let trace = match (args.tau.or(file.tau), args.kmeans_trace.or(file.kmeans_trace)) {
                (Some(t), _) => KmeansTrace::Explicit(t),
                (None, Some(KmeansTraceArg::InversePoints)) => KmeansTrace::InversePoints,
                (None, _) => KmeansTrace::Clusters(clusters),
            };
            ProblemSpec::Kmeans {
                points,
                trace,
                normalize: args.normalize_cost || file.normalize_cost.unwrap_or(false),
            }
        }
        ProblemKind::SparsestCut => ProblemSpec::SparsestCut { data: need_data()? },
    };

    let global_log = match (&args.log_every, &file.log_every) {
        (Some(s), _) => Some(parse_log_every(&LogEveryValue::Named(s.clone()))?),
        (None, Some(v)) => Some(parse_log_every(v)?),
        (None, None) => None,
    };
    let diagnostics = args.diagnostics || file.diagnostics.unwrap_or(false);
    let mut algos = Vec::with_capacity(variants.len());
    for v in variants {
        let ov = file.overrides.get(v.name()).cloned().unwrap_or_default();
        let ov_log = ov.log_every.as_ref().map(parse_log_every).transpose()?;
        let run = AlgoRun {
            variant: v,
            beta0: args.beta0.or(ov.beta0).or(file.beta0).unwrap_or(kind.default_beta0()),
            iters: args.iters.or(ov.iters).or(file.iters).unwrap_or(DEFAULT_ITERS),
            batch_f: args.batch_f.or(ov.batch_f).or(file.batch_f).unwrap_or(1),
            batch_g: args.batch_g.or(ov.batch_g).or(file.batch_g).unwrap_or(1),
            log: match (&args.log_every, ov_log, global_log) {
                (Some(_), _, Some(g)) => g,
                (_, Some(o), _) => o,
                (_, None, Some(g)) => g,
                _ => LogSchedule::Geometric,
            },
            diagnostics,
        };
        if !(run.beta0 > 0.0 && run.beta0.is_finite()) {
            return Err(config_err(format!("beta0 must be positive, got {}", run.beta0)));
        }
        if run.batch_f == 0 || run.batch_g == 0 {
            return Err(config_err("batch sizes must be at least 1"));
        }
        algos.push(run);
    }

    let out = args.out.clone().or(file.out.clone()).unwrap_or_else(|| PathBuf::from("results"));
    Ok(RunSpec {
        problem,
        algos,
        seeds,
        out,
        format: args.format.or(file.format).unwrap_or(TraceFormat::Csv),
        reference_iters: args.reference_iters.or(file.reference_iters).filter(|&n| n > 0),
        theory: args.theory.or(file.theory).unwrap_or(TheoryMode::Auto),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunSpec> {
        parse_config(std::iter::once("hsag").chain(args.iter().copied()))
    }

    fn cli_err(r: Result<RunSpec>) -> CliError {
        r.unwrap_err().downcast::<CliError>().expect("classified error")
    }

    #[test]
    fn two_seeds() {
        let s = parse(&["--problem", "synthetic", "--algo", "v2", "--iters", "100000", "--seed", "1", "--seed", "2"]).unwrap();
        assert_eq!(s.seeds, vec![1, 2]);
        assert_eq!(s.algos.len(), 1);
        assert_eq!(s.algos[0].iters, 100_000);
        assert_eq!(s.algos[0].variant, Variant::V2);
    }

    #[test]
    fn missing_data_for_completion() {
        let e = cli_err(parse(&["--problem", "mc-box", "--algo", "v1", "--zeta", "5"]));
        assert_eq!(e, CliError::MissingData { problem: "mc-box" });
        let e = cli_err(parse(&["--problem", "sparsest-cut", "--algo", "v2"]));
        assert!(matches!(e, CliError::MissingData { .. }));
    }

    #[test]
    fn default_beta0_per_problem() {
        let s = parse(&["--problem", "mc-box", "--algo", "v1", "--zeta", "5", "--data", "x"]).unwrap();
        assert_eq!(s.algos[0].beta0, 10.0);
        let s = parse(&["--problem", "sparsest-cut", "--algo", "v2", "--data", "g"]).unwrap();
        assert_eq!(s.algos[0].beta0, 100.0);
        let s = parse(&["--problem", "kmeans", "--algo", "v2"]).unwrap();
        assert_eq!(s.algos[0].beta0, 7.0);
    }

    #[test]
    fn v2_with_prox_box_conflicts() {
        let e = cli_err(parse(&[
            "--problem", "mc-box", "--algo", "v2", "--zeta", "5", "--data", "x", "--box-mode", "prox",
        ]));
        match e {
            CliError::Conflict(msg) => assert!(msg.contains("v2") && msg.contains("prox")),
            other => panic!("unexpected {other:?}"),
        }
        let s = parse(&["--problem", "mc-box", "--algo", "v2", "--algo", "v1", "--zeta", "5", "--data", "x"]).unwrap();
        assert!(matches!(s.problem, ProblemSpec::McBox { mode: BoxMode::SeparableV2, .. }));
    }

    #[test]
    fn unknown_flag_rejected() {
        let e = cli_err(parse(&["--problem", "synthetic", "--algo", "v1", "--bogus", "1"]));
        assert!(matches!(e, CliError::Config(_)));
    }

    #[test]
    fn bad_values_rejected() {
        assert!(parse(&["--problem", "synthetic", "--algo", "v3"]).is_err());
        assert!(parse(&["--problem", "synthetic"]).is_err());
        assert!(parse(&["--problem", "synthetic", "--algo", "v1", "--beta0", "-1"]).is_err());
        assert!(parse(&["--problem", "synthetic", "--algo", "v1", "--log-every", "0"]).is_err());
        assert!(parse(&["--problem", "synthetic", "--algo", "v1", "--seed", "3", "--seed", "3"]).is_err());
        assert!(parse(&["--problem", "synthetic", "--algo", "v1", "--algo", "v1"]).is_err());
    }

    #[test]
    fn log_every_forms() {
        let s = parse(&["--problem", "synthetic", "--algo", "v1", "--log-every", "50"]).unwrap();
        assert_eq!(s.algos[0].log, LogSchedule::Every(50));
        let s = parse(&["--problem", "synthetic", "--algo", "v1", "--log-every", "geometric"]).unwrap();
        assert_eq!(s.algos[0].log, LogSchedule::Geometric);
    }

    #[test]
    fn flags_override_file_values() {
        let file: FileConfig = toml::from_str(
            r#"
            problem = "synthetic"
            algo = ["v1", "v2"]
            beta0 = 0.5
            iters = 300
            seed = [4, 5, 6]
            [overrides.v2]
            beta0 = 0.05
            batch_g = 8
            "#,
        )
        .unwrap();
        let s = resolve(Args::default(), file.clone()).unwrap();
        assert_eq!(s.seeds, vec![4, 5, 6]);
        assert_eq!(s.algos[0].beta0, 0.5);
        assert_eq!(s.algos[1].beta0, 0.05);
        assert_eq!(s.algos[1].batch_g, 8);
        assert_eq!(s.algos[1].iters, 300);

        let args = Args {
            beta0: Some(2.0),
            seeds: vec![9],
            ..Args::default()
        };
        let s = resolve(args, file).unwrap();
        assert_eq!(s.seeds, vec![9]);
        assert!(s.algos.iter().all(|a| a.beta0 == 2.0));
    }

    #[test]
    fn unknown_file_keys_rejected() {
        assert!(toml::from_str::<FileConfig>("problem = \"synthetic\"\nspeed = 3").is_err());
        let file: FileConfig = toml::from_str("problem = \"synthetic\"\nalgo = [\"v1\"]\n[overrides.v2]\nbeta0 = 1.0").unwrap();
        assert!(resolve(Args::default(), file).is_err());
    }

    #[test]
    fn kmeans_trace_choice() {
        let s = parse(&["--problem", "kmeans", "--algo", "v2", "--clusters", "4"]).unwrap();
        assert!(matches!(s.problem, ProblemSpec::Kmeans { trace: KmeansTrace::Clusters(4), .. }));
        let s = parse(&["--problem", "kmeans", "--algo", "v2", "--kmeans-trace", "inverse-points"]).unwrap();
        assert!(matches!(s.problem, ProblemSpec::Kmeans { trace: KmeansTrace::InversePoints, .. }));
        let s = parse(&["--problem", "kmeans", "--algo", "v2", "--tau", "2.5"]).unwrap();
        assert!(matches!(s.problem, ProblemSpec::Kmeans { trace: KmeansTrace::Explicit(t), .. } if t == 2.5));
    }
}
