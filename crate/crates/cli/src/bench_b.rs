//! Benchmark B: maglev suspension under PD control with a load-mass step,
//! estimating the mass as an augmented state from noisy gap readings.

use hybrid_kf::models::{MaglevConstants, MaglevModel, SystemModel};
use hybrid_kf::{GaussianBelief, Matrix, Vector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::report::{machine_descriptor, ExperimentReport, ReportMetadata};
use crate::runner::{
    combined_digest, component_mse, evaluate, trace_csv, RunMetrics, Setup, Truth,
};
use crate::seeds;

/// Filter model: the RK4 plant with the mass random walk in `Q`.
pub fn filter_model(cfg: &ExperimentConfig) -> CliResult<MaglevModel> {
    let q = Matrix::from_diagonal(&Vector::from_column_slice(&[
        cfg.ml_q_gap,
        cfg.ml_q_vel,
        cfg.ml_q_cur,
        cfg.ml_q_mass,
    ]));
    Ok(MaglevModel::new(
        cfg.maglev_constants(),
        cfg.ml_dt,
        q,
        cfg.ml_gap_noise_var,
    )?)
}

/// True mass at time index `t`.
pub fn true_mass(cfg: &ExperimentConfig, t: usize) -> f64 {
    if t as f64 * cfg.ml_dt >= cfg.ml_mass_step_time {
        cfg.ml_mass_final
    } else {
        cfg.ml_mass_initial
    }
}

/// Initial true state: resting at `ml_gap0` with the current that holds the
/// initial mass there.
pub fn initial_state(cfg: &ExperimentConfig, model: &MaglevModel) -> Vector {
    let m = cfg.ml_mass_initial;
    Vector::from_column_slice(&[
        cfg.ml_gap0,
        0.0,
        model.equilibrium_current(m, cfg.ml_gap0),
        m,
    ])
}

fn initial_belief(cfg: &ExperimentConfig, model: &MaglevModel) -> CliResult<GaussianBelief> {
    let x0 = initial_state(cfg, model);
    let mean = Vector::from_column_slice(&[x0[0], x0[1], x0[2], cfg.ml_mass_guess]);
    let cov = Matrix::from_diagonal(&Vector::from_column_slice(&[
        cfg.ml_p0_gap,
        cfg.ml_p0_vel,
        cfg.ml_p0_cur,
        cfg.ml_p0_mass,
    ]));
    Ok(GaussianBelief::new(mean, cov)?)
}

/// Closed-loop truth of run `run`. Process noise enters the gap, velocity
/// and current channels; the mass follows its step profile exactly.
pub fn simulate(cfg: &ExperimentConfig, model: &MaglevModel, run: usize) -> CliResult<Truth> {
    let mut rng = seeds::stream(cfg.seed, run as u64, seeds::TRUTH_LANE);
    let ctrl = cfg.controller();
    let sd = [
        cfg.ml_q_gap.sqrt(),
        cfg.ml_q_vel.sqrt(),
        cfg.ml_q_cur.sqrt(),
    ];
    let meas_sd = cfg.ml_gap_noise_var.sqrt();
    let mut x = initial_state(cfg, model);
    let mut truth = Truth {
        states: Vec::with_capacity(cfg.horizon),
        inputs: Vec::with_capacity(cfg.horizon),
        measurements: Vec::with_capacity(cfg.horizon),
    };
    let leave = |t: usize, what: String| CliError::Scenario(format!("run {run}, step {t}: {what}"));
    for t in 0..cfg.horizon {
        let u = Vector::from_element(1, ctrl.voltage(model, &x));
        let mut next = model
            .transition(&x, &u, t as u64)
            .map_err(|e| leave(t + 1, e.to_string()))?;
        for (i, s) in sd.iter().enumerate() {
            next[i] += s * rng.sample::<f64, _>(StandardNormal);
        }
        next[3] = true_mass(cfg, t + 1);
        if next[0] <= 0.0 || next.iter().any(|v| !v.is_finite()) {
            return Err(leave(
                t + 1,
                format!("plant left the x1 > 0 domain (gap {})", next[0]),
            ));
        }
        let y = Vector::from_element(1, next[0] + meas_sd * rng.sample::<f64, _>(StandardNormal));
        truth.inputs.push(u);
        truth.measurements.push(y);
        truth.states.push(next.clone());
        x = next;
    }
    Ok(truth)
}

pub fn simulate_all(cfg: &ExperimentConfig, model: &MaglevModel) -> CliResult<Vec<Truth>> {
    (0..cfg.mc_runs)
        .into_par_iter()
        .map(|r| simulate(cfg, model, r))
        .collect()
}

/// `|m̂_T − m_T| / |m̂_0 − m_0|`, or `None` when the initial guess is exact.
pub fn mass_convergence(
    initial_guess: f64,
    initial_mass: f64,
    final_estimate: f64,
    final_mass: f64,
) -> Option<f64> {
    let e0 = (initial_guess - initial_mass).abs();
    (e0 > 0.0).then(|| (final_estimate - final_mass).abs() / e0)
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<ExperimentReport> {
    let model = filter_model(cfg)?;
    let init = initial_belief(cfg, &model)?;
    let pf_cov = init.cov().clone();
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
        param_mse: Some(component_mse(est, truth, 3)),
        convergence: mass_convergence(
            cfg.ml_mass_guess,
            cfg.ml_mass_initial,
            est.means.last().map_or(f64::NAN, |m| m[3]),
            truth.states.last().map_or(f64::NAN, |x| x[3]),
        ),
    });
    let constant_set = if cfg.maglev_constants() == MaglevConstants::default() {
        "maglev placeholder constants"
    } else {
        "maglev custom constants"
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
            notes: vec![format!(
                "mass steps from {} kg to {} kg at {} s; filters start from {} kg",
                cfg.ml_mass_initial, cfg.ml_mass_final, cfg.ml_mass_step_time, cfg.ml_mass_guess
            )],
        },
        results,
    })
}

pub fn trace(cfg: &ExperimentConfig, run: usize) -> CliResult<String> {
    let model = filter_model(cfg)?;
    let init = initial_belief(cfg, &model)?;
    let pf_cov = init.cov().clone();
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
    Ok(trace_csv(
        &cfg.filters,
        &setup,
        &truth,
        run,
        &[(0, "gap"), (3, "mass")],
    ))
}
