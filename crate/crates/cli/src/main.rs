use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hybrid_kf::cost::{parse_range, sweep_csv, sweep_grid, JRule, MRule};
use hybrid_kf_cli::filter_id::parse_filter_list;
use hybrid_kf_cli::report::write_output;
use hybrid_kf_cli::{
    check_failures, run_experiment, run_trace, Benchmark, CliError, CliResult, ExperimentConfig,
    OutputFormat,
};

/// Monte-Carlo benchmarks for the EKF, unscented, hybrid and particle filters.
#[derive(Parser)]
#[command(name = "bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark and emit a report.
    Run {
        #[arg(long, value_enum)]
        benchmark: Option<Benchmark>,
        /// TOML config; omitted keys take the benchmark defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated filter names, e.g. EKF,UKF,NewKF,PF-NewKF.
        #[arg(long)]
        filters: Option<String>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
    },
    /// Flop-model reduction over a grid, as CSV.
    Sweep {
        /// State dimensions: comma-separated ranges such as 1..=10 or 50,100,200.
        #[arg(long)]
        n: String,
        /// Measurement dimension: a number or "half" for ceil(n/2).
        #[arg(long)]
        m: String,
        /// Function cost: a number or "<k>n".
        #[arg(long)]
        j: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-step error and covariance series of one run, as CSV.
    Trace {
        #[arg(long, value_enum)]
        benchmark: Option<Benchmark>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        filters: Option<String>,
        /// Defaults to the config's trace_run.
        #[arg(long)]
        run_index: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print configuration keys.
    Config {
        /// Print every key with its default and a description.
        #[arg(long)]
        defaults: bool,
        #[arg(long, value_enum, default_value = "a")]
        benchmark: Benchmark,
    },
}

fn base_config(benchmark: Option<Benchmark>, config: Option<&Path>) -> CliResult<ExperimentConfig> {
    match config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            match benchmark {
                Some(b) if b != cfg.benchmark => Err(CliError::Config(format!(
                    "--benchmark {b:?} conflicts with benchmark {:?} in {}",
                    cfg.benchmark,
                    path.display()
                ))),
                _ => Ok(cfg),
            }
        }
        None => Ok(ExperimentConfig::defaults(
            benchmark.unwrap_or(Benchmark::A),
        )),
    }
}

fn apply_filters(cfg: &mut ExperimentConfig, filters: Option<&str>) -> CliResult<()> {
    if let Some(list) = filters {
        cfg.filters = parse_filter_list(list).map_err(CliError::Config)?;
    }
    Ok(())
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run {
            benchmark,
            config,
            filters,
            runs,
            seed,
            out,
            format,
        } => {
            let mut cfg = base_config(benchmark, config.as_deref())?;
            apply_filters(&mut cfg, filters.as_deref())?;
            if let Some(r) = runs {
                cfg.mc_runs = r;
                cfg.trace_run = cfg.trace_run.min(r.saturating_sub(1));
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if out.is_some() {
                cfg.out = out;
            }
            if let Some(f) = format {
                cfg.format = f;
            }
            cfg.validate()?;
            let report = run_experiment(&cfg)?;
            write_output(&report.render(cfg.format), cfg.out.as_deref())?;
            check_failures(&report)
        }
        Command::Sweep { n, m, j, out } => {
            let m: MRule = m.parse()?;
            let j: JRule = j.parse()?;
            let mut rows = Vec::new();
            for part in n.split(',') {
                rows.extend(sweep_grid(parse_range(part)?, m, j)?);
            }
            write_output(&sweep_csv(&rows), out.as_deref())
        }
        Command::Trace {
            benchmark,
            config,
            filters,
            run_index,
            seed,
            out,
        } => {
            let mut cfg = base_config(benchmark, config.as_deref())?;
            apply_filters(&mut cfg, filters.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let run = run_index.unwrap_or(cfg.trace_run);
            cfg.mc_runs = cfg.mc_runs.max(run + 1);
            write_output(&run_trace(&cfg, run)?, out.as_deref())
        }
        Command::Config {
            defaults,
            benchmark,
        } => {
            let cfg = ExperimentConfig::defaults(benchmark);
            let text = if defaults {
                cfg.documented_toml()
            } else {
                cfg.to_toml_string()
            };
            write_output(&text, None)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
