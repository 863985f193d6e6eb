//! Experiment reports and their CSV, JSON and markdown renderings.

use std::fmt::Write as _;
use std::path::Path;

use hybrid_kf::filters::JacobianMode;
use serde::{Deserialize, Serialize};

use crate::config::{Benchmark, OutputFormat};
use crate::error::{CliError, CliResult};
use crate::filter_id::FilterId;
use crate::runner::RunFailure;

/// Failure diagnoses kept per filter; the count is always complete.
pub const MAX_LISTED_FAILURES: usize = 10;

/// Columns holding wall-clock measurements; always last in CSV output.
pub const TIMING_COLUMNS: [&str; 2] = ["median_step_seconds", "total_seconds"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub version: String,
    pub benchmark: Benchmark,
    /// SHA-256 of the canonical configuration.
    pub config_hash: String,
    pub seed: u64,
    pub mc_runs: usize,
    pub horizon: usize,
    pub particles: usize,
    pub constant_set: String,
    pub jacobian_mode: JacobianMode,
    pub machine: String,
    /// SHA-256 over every run's input and measurement sequence.
    pub sequence_digest: String,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterResult {
    pub filter: FilterId,
    pub runs: usize,
    pub failed_runs: usize,
    /// Mean over successful runs of the per-run MSE (air gap for benchmark B).
    pub mse_mean: Option<f64>,
    pub mse_std_error: Option<f64>,
    /// Mass-state MSE (benchmark B).
    pub param_mse_mean: Option<f64>,
    pub param_mse_std_error: Option<f64>,
    /// Mean over runs of `|m̂_T − m_T| / |m̂_0 − m_0|` (benchmark B).
    pub mass_convergence: Option<f64>,
    pub median_step_seconds: Option<f64>,
    pub total_seconds: Option<f64>,
    pub failures: Vec<RunFailure>,
}

impl FilterResult {
    pub fn new(filter: FilterId, runs: usize) -> Self {
        Self {
            filter,
            runs,
            failed_runs: 0,
            mse_mean: None,
            mse_std_error: None,
            param_mse_mean: None,
            param_mse_std_error: None,
            mass_convergence: None,
            median_step_seconds: None,
            total_seconds: None,
            failures: Vec::new(),
        }
    }

    pub fn record_failure(&mut self, f: RunFailure) {
        self.failed_runs += 1;
        if self.failures.len() < MAX_LISTED_FAILURES {
            self.failures.push(f);
        }
    }

    /// More than 1% of runs failed.
    pub fn exceeds_failure_threshold(&self) -> bool {
        self.failed_runs * 100 > self.runs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub metadata: ReportMetadata,
    pub results: Vec<FilterResult>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// RFC-4180 field quoting.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_line(fields: &[String]) -> String {
    let mut line = fields
        .iter()
        .map(|f| csv_field(f))
        .collect::<Vec<_>>()
        .join(",");
    line.push_str("\r\n");
    line
}

impl ExperimentReport {
    fn is_b(&self) -> bool {
        self.metadata.benchmark == Benchmark::B
    }

    pub fn csv_header(&self) -> Vec<&'static str> {
        let mut h = vec!["filter", "runs", "failed_runs", "mse_mean", "mse_std_error"];
        if self.is_b() {
            h.extend(["param_mse_mean", "param_mse_std_error", "mass_convergence"]);
        }
        h.extend(TIMING_COLUMNS);
        h
    }

    /// One header line and one row per filter; timing columns last.
    pub fn to_csv(&self) -> String {
        let mut out = csv_line(
            &self
                .csv_header()
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>(),
        );
        for r in &self.results {
            let mut row = vec![
                r.filter.to_string(),
                r.runs.to_string(),
                r.failed_runs.to_string(),
                opt(r.mse_mean),
                opt(r.mse_std_error),
            ];
            if self.is_b() {
                row.extend([
                    opt(r.param_mse_mean),
                    opt(r.param_mse_std_error),
                    opt(r.mass_convergence),
                ]);
            }
            row.extend([opt(r.median_step_seconds), opt(r.total_seconds)]);
            out.push_str(&csv_line(&row));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> CliResult<Self> {
        serde_json::from_str(s).map_err(|e| CliError::Config(format!("report JSON: {e}")))
    }

    /// Aligned table: Filter | Execution Time (s) | MSE, plus the parameter
    /// columns for benchmark B.
    pub fn to_markdown(&self) -> String {
        let sci = |v: Option<f64>| {
            v.map(|x| format!("{x:.4e}"))
                .unwrap_or_else(|| "n/a".into())
        };
        let mut header = vec!["Filter", "Execution Time (s)"];
        if self.is_b() {
            header.extend(["Air-gap MSE", "Parameter MSE", "Mass convergence"]);
        } else {
            header.push("MSE");
        }
        header.push("Failed runs");
        let rows: Vec<Vec<String>> = self
            .results
            .iter()
            .map(|r| {
                let mut row = vec![
                    r.filter.to_string(),
                    r.total_seconds
                        .map(|t| format!("{t:.4}"))
                        .unwrap_or_else(|| "n/a".into()),
                    sci(r.mse_mean),
                ];
                if self.is_b() {
                    row.push(sci(r.param_mse_mean));
                    row.push(
                        r.mass_convergence
                            .map(|c| format!("{c:.4}"))
                            .unwrap_or_else(|| "n/a".into()),
                    );
                }
                row.push(format!("{}/{}", r.failed_runs, r.runs));
                row
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| {
                rows.iter()
                    .map(|r| r[c].chars().count())
                    .chain([header[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            let mut s = String::from("|");
            for (c, w) in cells.iter().zip(&widths) {
                let _ = write!(s, " {c:<w$} |");
            }
            s.push('\n');
            s
        };
        let mut out = line(&header.iter().map(|s| s.to_string()).collect::<Vec<_>>());
        out.push('|');
        for w in &widths {
            out.push_str(&"-".repeat(w + 2));
            out.push('|');
        }
        out.push('\n');
        for r in &rows {
            out.push_str(&line(r));
        }
        out
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
            OutputFormat::Md => self.to_markdown(),
        }
    }
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn write_output(text: &str, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io {
            path: p.display().to_string(),
            source,
        }),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

/// Drops the trailing timing columns from a CSV produced by
/// [`ExperimentReport::to_csv`].
pub fn strip_timing_columns(csv: &str) -> String {
    csv.split_terminator("\r\n")
        .map(|l| {
            let mut parts = l.rsplitn(TIMING_COLUMNS.len() + 1, ',');
            let kept = parts.nth(TIMING_COLUMNS.len()).unwrap_or("");
            format!("{kept}\r\n")
        })
        .collect()
}

/// Operating system, architecture and worker count.
pub fn machine_descriptor() -> String {
    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    format!(
        "{}-{}, {} hardware threads",
        std::env::consts::ARCH,
        std::env::consts::OS,
        threads
    )
}
