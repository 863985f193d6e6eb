//! Benchmark driver: seeded Monte-Carlo comparisons of the hybrid-kf
//! filters on a scalar time series (A) and a maglev plant (B), plus the
//! flop-model sweep.

pub mod bench_a;
pub mod bench_b;
pub mod config;
pub mod error;
pub mod filter_id;
pub mod report;
pub mod runner;
pub mod seeds;

pub use config::{Benchmark, ExperimentConfig, OutputFormat};
pub use error::{CliError, CliResult};
pub use filter_id::FilterId;
pub use report::ExperimentReport;

/// Runs the configured benchmark.
pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<ExperimentReport> {
    cfg.validate()?;
    match cfg.benchmark {
        Benchmark::A => bench_a::run(cfg),
        Benchmark::B => bench_b::run(cfg),
    }
}

/// Per-step trace of run `run` as CSV.
pub fn run_trace(cfg: &ExperimentConfig, run: usize) -> CliResult<String> {
    cfg.validate()?;
    if run >= cfg.mc_runs {
        return Err(CliError::Config(format!(
            "run index {run} is not below mc_runs {}",
            cfg.mc_runs
        )));
    }
    match cfg.benchmark {
        Benchmark::A => bench_a::trace(cfg, run),
        Benchmark::B => bench_b::trace(cfg, run),
    }
}

/// The first filter whose failures exceed 1% of runs, as an error.
pub fn check_failures(report: &ExperimentReport) -> CliResult<()> {
    match report
        .results
        .iter()
        .find(|r| r.exceeds_failure_threshold())
    {
        Some(r) => Err(CliError::FailureThreshold {
            filter: r.filter.to_string(),
            failed: r.failed_runs,
            runs: r.runs,
        }),
        None => Ok(()),
    }
}
