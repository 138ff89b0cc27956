//! Benchmark harness around the `hsag` solvers: argument and config-file
//! parsing, instance construction, parallel sweeps, trace and summary
//! output.

pub mod bench;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fmt;

pub use bench::{build_instance, run_benchmark};
pub use config::{parse_config, RunSpec};

/// Failures the harness classifies itself. Solver and loader errors travel
/// as `hsag::Error`.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// A problem that reads a dataset was given no `--data`.
    MissingData { problem: &'static str },
    /// Algorithm and problem settings that cannot be combined.
    Conflict(String),
    Config(String),
    Data(String),
    /// Some runs of the sweep failed; `code` is the most severe exit code.
    RunsFailed { failed: usize, total: usize, code: i32 },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::MissingData { problem } => write!(f, "MissingData: problem '{problem}' needs --data"),
            CliError::Conflict(msg) => write!(f, "conflicting settings: {msg}"),
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Data(msg) => write!(f, "data error: {msg}"),
            CliError::RunsFailed { failed, total, .. } => write!(f, "{failed} of {total} runs failed"),
        }
    }
}

impl std::error::Error for CliError {}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Exit code for a library error.
pub fn solver_exit_code(e: &hsag::Error) -> i32 {
    use hsag::Error as E;
    match e {
        E::Poisoned { .. } | E::NonFinite(_) | E::EigenNonConvergence { .. } => EXIT_NUMERIC,
        E::EmptyDataset | E::DuplicateRating { .. } | E::Parse { .. } | E::Io(_) => EXIT_DATA,
        _ => EXIT_CONFIG,
    }
}

/// Exit code for any error surfaced by [`cli_main`].
pub fn exit_code(e: &anyhow::Error) -> i32 {
    if let Some(c) = e.downcast_ref::<CliError>() {
        return match c {
            CliError::Data(_) => EXIT_DATA,
            CliError::RunsFailed { code, .. } => *code,
            _ => EXIT_CONFIG,
        };
    }
    if let Some(s) = e.downcast_ref::<hsag::Error>() {
        return solver_exit_code(s);
    }
    if e.downcast_ref::<std::io::Error>().is_some() {
        return EXIT_DATA;
    }
    EXIT_CONFIG
}

/// Parses `argv`, runs the sweep and writes all outputs.
pub fn cli_main<I, T>(argv: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let spec = parse_config(argv)?;
    let summary = run_benchmark(&spec)?;
    let failed: Vec<i32> = summary.runs.iter().filter_map(|r| r.exit_code).collect();
    for r in summary.runs.iter().filter(|r| r.error.is_some()) {
        eprintln!("run {} seed {} failed: {}", r.algo, r.seed, r.error.as_deref().unwrap_or(""));
    }
    eprintln!("wrote {} traces and summary.json to {}", summary.runs.len(), spec.out.display());
    if !failed.is_empty() {
        return Err(CliError::RunsFailed {
            failed: failed.len(),
            total: summary.runs.len(),
            code: failed.into_iter().max().unwrap_or(EXIT_CONFIG),
        }
        .into());
    }
    Ok(())
}
