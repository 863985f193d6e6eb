//! Benchmark A: scalar time series with Gamma process noise.

use hybrid_kf::cost::quoted_reduction_report;
use hybrid_kf::models::{TimeSeriesModel, TimeSeriesParams};
use hybrid_kf::particle::gamma_sample;
use hybrid_kf::{GaussianBelief, Matrix, Vector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::report::{machine_descriptor, ExperimentReport, ReportMetadata};
use crate::runner::{
    combined_digest, component_mse, evaluate, trace_csv, RunMetrics, Setup, Truth,
};
use crate::seeds;

/// Truth and measurements of run `run`, from its own stream.
pub fn simulate(cfg: &ExperimentConfig, model: &TimeSeriesModel, run: usize) -> CliResult<Truth> {
    let mut rng = seeds::stream(cfg.seed, run as u64, seeds::TRUTH_LANE);
    let p = model.params();
    let noise_sd = cfg.ts_obs_noise_var.sqrt();
    let mut x = cfg.ts_x0;
    let mut truth = Truth {
        states: Vec::with_capacity(cfg.horizon),
        inputs: vec![Vector::zeros(0); cfg.horizon],
        measurements: Vec::with_capacity(cfg.horizon),
    };
    for t in 0..cfg.horizon as u64 {
        let v = if p.noise_free {
            0.0
        } else {
            gamma_sample(p.gamma_shape, p.gamma_scale, &mut rng)?
        };
        x = model.process(x, t, v);
        let n = if p.noise_free {
            0.0
        } else {
            noise_sd * rng.sample::<f64, _>(StandardNormal)
        };
        truth.states.push(Vector::from_element(1, x));
        truth
            .measurements
            .push(Vector::from_element(1, model.observe(x, t + 1, n)));
    }
    Ok(truth)
}

pub fn simulate_all(cfg: &ExperimentConfig, model: &TimeSeriesModel) -> CliResult<Vec<Truth>> {
    (0..cfg.mc_runs)
        .into_par_iter()
        .map(|r| simulate(cfg, model, r))
        .collect()
}

struct Parts {
    model: TimeSeriesModel,
    init: GaussianBelief,
    pf_cov: Matrix,
}

fn parts(cfg: &ExperimentConfig) -> CliResult<Parts> {
    Ok(Parts {
        model: TimeSeriesModel::new(cfg.time_series_params())?,
        init: GaussianBelief::scalar(cfg.ts_x0, cfg.ts_p0)?,
        pf_cov: Matrix::from_element(1, 1, cfg.pf_p0),
    })
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<ExperimentReport> {
    let Parts {
        model,
        init,
        pf_cov,
    } = parts(cfg)?;
    let opts = cfg.filter_options();
    let truths = simulate_all(cfg, &model)?;
    let setup = Setup {
        model: &model,
        init: &init,
        pf_cov: &pf_cov,
        particles: cfg.particles,
        opts: &opts,
        seed: cfg.seed,
    };
    let results = evaluate(cfg, &setup, &truths, |est, truth| RunMetrics {
        mse: component_mse(est, truth, 0),
        param_mse: None,
        convergence: None,
    });
    let constant_set = if cfg.time_series_params() == TimeSeriesParams::default() {
        "time-series defaults"
    } else {
        "time-series custom"
    };
    Ok(ExperimentReport {
        metadata: ReportMetadata {
            version: format!("v{}", env!("CARGO_PKG_VERSION")),
            benchmark: cfg.benchmark,
            config_hash: cfg.hash(),
            seed: cfg.seed,
            mc_runs: cfg.mc_runs,
            horizon: cfg.horizon,
            particles: cfg.particles,
            constant_set: constant_set.into(),
            jacobian_mode: cfg.jacobians,
            machine: machine_descriptor(),
            sequence_digest: combined_digest(&truths),
            notes: quoted_reduction_report()
                .lines()
                .map(str::to_string)
                .collect(),
        },
        results,
    })
}

pub fn trace(cfg: &ExperimentConfig, run: usize) -> CliResult<String> {
    let Parts {
        model,
        init,
        pf_cov,
    } = parts(cfg)?;
    let opts = cfg.filter_options();
    let truth = simulate(cfg, &model, run)?;
    let setup = Setup {
        model: &model,
        init: &init,
        pf_cov: &pf_cov,
        particles: cfg.particles,
        opts: &opts,
        seed: cfg.seed,
    };
    Ok(trace_csv(&cfg.filters, &setup, &truth, run, &[(0, "x")]))
}
