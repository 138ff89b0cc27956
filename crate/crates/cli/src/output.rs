//! Trace files and the summary record.

use std::fmt::Write as _;
use std::io::{self, Write};

use hsag::solver::{TheoryBound, TheoryConstants};
use hsag::{IterateTrace, TraceRow};
use serde::Serialize;

use crate::config::TraceFormat;

pub const CSV_HEADER: &str =
    "k,wall_ms,f_value,F_value,rel_subopt,infeas_dist,beta_k,eta_k,f_samples,g_samples,l1_err_f,l1_err_g";

pub const SCHEMA_VERSION: u32 = 1;

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn csv_cell(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

fn json_num(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => fmt_float(v),
        _ => "null".into(),
    }
}

pub fn csv_line(r: &TraceRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        r.k,
        fmt_float(r.wall_ms),
        fmt_float(r.f_value),
        fmt_float(r.objective_value),
        csv_cell(r.rel_subopt),
        csv_cell(r.infeas_dist),
        fmt_float(r.beta_k),
        csv_cell(r.eta_k),
        r.f_samples,
        r.g_samples,
        csv_cell(r.l1_err_f),
        csv_cell(r.l1_err_g),
    )
}

/// One JSON object per row with the CSV column names; absent or
/// non-finite values are `null`.
pub fn jsonl_line(r: &TraceRow) -> String {
    let mut s = String::with_capacity(256);
    let _ = write!(
        s,
        "{{\"k\":{},\"wall_ms\":{},\"f_value\":{},\"F_value\":{},\"rel_subopt\":{},\"infeas_dist\":{},\"beta_k\":{},\"eta_k\":{},\"f_samples\":{},\"g_samples\":{},\"l1_err_f\":{},\"l1_err_g\":{}}}",
        r.k,
        json_num(Some(r.wall_ms)),
        json_num(Some(r.f_value)),
        json_num(Some(r.objective_value)),
        json_num(r.rel_subopt),
        json_num(r.infeas_dist),
        json_num(Some(r.beta_k)),
        json_num(r.eta_k),
        r.f_samples,
        r.g_samples,
        json_num(r.l1_err_f),
        json_num(r.l1_err_g),
    );
    s
}

pub fn write_trace<W: Write>(out: &mut W, rows: &[TraceRow], format: TraceFormat) -> io::Result<()> {
    match format {
        TraceFormat::Csv => {
            writeln!(out, "{CSV_HEADER}")?;
            for r in rows {
                writeln!(out, "{}", csv_line(r))?;
            }
        }
        TraceFormat::Jsonl => {
            for r in rows {
                writeln!(out, "{}", jsonl_line(r))?;
            }
        }
    }
    Ok(())
}

pub fn trace_file_name(algo: &str, seed: u64, format: TraceFormat) -> String {
    format!("{algo}_seed{seed}.{}", format.extension())
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceInfo {
    pub value: f64,
    pub source: hsag::ReferenceSource,
}

#[derive(Debug, Clone, Serialize)]
pub struct FinalMetrics {
    pub k: usize,
    pub wall_ms: f64,
    pub f_value: f64,
    #[serde(rename = "F_value")]
    pub objective_value: f64,
    pub rel_subopt: Option<f64>,
    pub infeas_dist: Option<f64>,
    pub f_samples: u64,
    pub g_samples: u64,
    pub g_epochs: Option<f64>,
    pub test_rmse: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub algo: String,
    pub seed: u64,
    pub trace_file: Option<String>,
    pub status: &'static str,
    pub error: Option<String>,
    #[serde(skip)]
    pub exit_code: Option<i32>,
    #[serde(rename = "final")]
    pub final_metrics: Option<FinalMetrics>,
}

/// Seed means at one logged iteration; a field is absent when any seed
/// lacks it.
#[derive(Debug, Clone, Serialize)]
pub struct Checkpoint {
    pub k: usize,
    pub f_value: f64,
    #[serde(rename = "F_value")]
    pub objective_value: f64,
    pub rel_subopt: Option<f64>,
    pub infeas_dist: Option<f64>,
    pub smoothed_gap: Option<f64>,
    pub l1_err_f: Option<f64>,
    pub l1_err_g: Option<f64>,
    pub beta_k: f64,
    pub f_samples: f64,
    pub g_samples: f64,
    pub g_epochs: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Slopes {
    /// Checkpoints with `k` at least this value enter the fit.
    pub fit_from_k: usize,
    pub rel_subopt: Option<f64>,
    pub infeas_dist: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Samples {
    pub f_total: f64,
    pub g_total: f64,
    /// `g_total / m`.
    pub g_epochs: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoryCurve {
    pub diameters_exact: bool,
    pub constants: TheoryConstants,
    pub points: Vec<TheoryBound>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlgoSummary {
    pub algo: String,
    pub beta0: f64,
    pub iters: usize,
    pub batch_f: usize,
    pub batch_g: usize,
    pub seeds: Vec<u64>,
    pub completed_seeds: usize,
    pub checkpoints: Vec<Checkpoint>,
    pub slopes: Slopes,
    pub samples: Option<Samples>,
    pub theory: Option<TheoryCurve>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub problem: String,
    pub n: usize,
    pub m: usize,
    pub dim: usize,
    pub format: TraceFormat,
    pub reference: Option<ReferenceInfo>,
    pub runs: Vec<RunSummary>,
    pub algorithms: Vec<AlgoSummary>,
}

pub fn epochs(g_samples: f64, m: usize) -> Option<f64> {
    (m > 0).then(|| g_samples / m as f64)
}

fn mean_of(traces: &[&IterateTrace], k: usize, metric: impl Fn(&TraceRow) -> Option<f64>) -> Option<f64> {
    let mut s = 0.0;
    for t in traces {
        s += metric(t.row(k)?)?;
    }
    Some(s / traces.len() as f64)
}

/// Seed means at every `k` logged by all traces.
pub fn checkpoints(traces: &[&IterateTrace], m: usize) -> Vec<Checkpoint> {
    let Some(first) = traces.first() else {
        return Vec::new();
    };
    first
        .rows
        .iter()
        .filter(|r| traces.iter().all(|t| t.row(r.k).is_some()))
        .map(|r| {
            let k = r.k;
            let g_samples = mean_of(traces, k, |x| Some(x.g_samples as f64)).unwrap_or(0.0);
            Checkpoint {
                k,
                f_value: mean_of(traces, k, |x| Some(x.f_value)).unwrap_or(f64::NAN),
                objective_value: mean_of(traces, k, |x| Some(x.objective_value)).unwrap_or(f64::NAN),
                rel_subopt: mean_of(traces, k, |x| x.rel_subopt),
                infeas_dist: mean_of(traces, k, |x| x.infeas_dist),
                smoothed_gap: mean_of(traces, k, |x| x.smoothed_gap),
                l1_err_f: mean_of(traces, k, |x| x.l1_err_f),
                l1_err_g: mean_of(traces, k, |x| x.l1_err_g),
                beta_k: r.beta_k,
                f_samples: mean_of(traces, k, |x| Some(x.f_samples as f64)).unwrap_or(0.0),
                g_samples,
                g_epochs: epochs(g_samples, m),
            }
        })
        .collect()
}

/// Least-squares slope of `ln v` against `ln k` over positive finite values
/// with `k >= from`; needs two distinct points.
pub fn loglog_slope(points: impl IntoIterator<Item = (usize, f64)>, from: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .into_iter()
        .filter(|&(k, v)| k >= from.max(1) && v > 0.0 && v.is_finite())
        .map(|(k, v)| ((k as f64).ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

pub const SLOPE_FIT_FROM: usize = 10;

pub fn slopes(cps: &[Checkpoint]) -> Slopes {
    let series = |f: fn(&Checkpoint) -> Option<f64>| {
        loglog_slope(cps.iter().filter_map(|c| f(c).map(|v| (c.k, v))), SLOPE_FIT_FROM)
    };
    Slopes {
        fit_from_k: SLOPE_FIT_FROM,
        rel_subopt: series(|c| c.rel_subopt),
        infeas_dist: series(|c| c.infeas_dist),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(k: usize) -> TraceRow {
        TraceRow {
            k,
            wall_ms: 1.5,
            f_value: 0.1,
            objective_value: f64::INFINITY,
            rel_subopt: None,
            infeas_dist: Some(2.0),
            beta_k: 1.0,
            eta_k: Some(0.5),
            f_samples: 3,
            g_samples: 4,
            l1_err_f: None,
            l1_err_g: None,
            smoothed_gap: None,
        }
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 5e-324] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_float(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_keeps_empty_cells() {
        let line = csv_line(&row(7));
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), CSV_HEADER.split(',').count());
        assert_eq!(cells[0], "7");
        assert_eq!(cells[3], "inf");
        assert_eq!(cells[4], "");
        assert_eq!(cells[8], "3");
        assert_eq!(cells[10], "");
        assert_eq!(cells[11], "");
    }

    #[test]
    fn jsonl_is_valid_json() {
        let v: serde_json::Value = serde_json::from_str(&jsonl_line(&row(2))).unwrap();
        assert_eq!(v["k"], 2);
        assert!(v["F_value"].is_null());
        assert!(v["rel_subopt"].is_null());
        assert_eq!(v["infeas_dist"].as_f64(), Some(2.0));
        let keys: Vec<&str> = CSV_HEADER.split(',').collect();
        assert_eq!(v.as_object().unwrap().len(), keys.len());
        for k in keys {
            assert!(v.get(k).is_some(), "{k}");
        }
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(usize, f64)> = [1, 10, 100, 1000].iter().map(|&k| (k, 3.0 / (k as f64).sqrt())).collect();
        let s = loglog_slope(pts.clone(), 10).unwrap();
        assert!((s + 0.5).abs() < 1e-12);
        assert!(loglog_slope(pts, 1000).is_none());
        assert!(loglog_slope(vec![(10, 0.0), (100, 1.0)], 1).is_none());
    }
}
