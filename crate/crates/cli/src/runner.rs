//! Shared Monte-Carlo machinery: run one configured filter over a simulated
//! sequence, collect estimates, and time it.

use std::time::Instant;

use hybrid_kf::models::StochasticModel;
use hybrid_kf::particle::{pf_step, ParticleEnsemble};
use hybrid_kf::{FilterOptions, FilterState, GaussianBelief, Matrix, Vector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::filter_id::FilterId;
use crate::report::FilterResult;
use crate::seeds;

/// One simulated run: `inputs[t]` drives the step from index `t` to `t + 1`,
/// where `states[t]` and `measurements[t]` are the truth and observation.
#[derive(Debug, Clone)]
pub struct Truth {
    pub states: Vec<Vector>,
    pub inputs: Vec<Vector>,
    pub measurements: Vec<Vector>,
}

impl Truth {
    pub fn horizon(&self) -> usize {
        self.measurements.len()
    }

    /// SHA-256 over the input and measurement sequence.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = SequenceHasher::default();
        for (u, y) in self.inputs.iter().zip(&self.measurements) {
            h.feed(u, y);
        }
        h.finish()
    }
}

#[derive(Default)]
struct SequenceHasher(Sha256);

impl SequenceHasher {
    fn feed(&mut self, u: &Vector, y: &Vector) {
        for v in u.iter().chain(y.iter()) {
            self.0.update(v.to_bits().to_le_bytes());
        }
    }

    fn finish(self) -> [u8; 32] {
        self.0.finalize().into()
    }
}

/// Everything a filter needs besides its own random stream.
pub struct Setup<'a, M: ?Sized> {
    pub model: &'a M,
    pub init: &'a GaussianBelief,
    /// Per-particle covariance for Kalman proposals.
    pub pf_cov: &'a Matrix,
    pub particles: usize,
    pub opts: &'a FilterOptions,
    pub seed: u64,
}

/// Posterior means and covariances for `t = 1..=horizon`.
#[derive(Debug, Clone)]
pub struct Estimates {
    pub means: Vec<Vector>,
    pub covs: Vec<Matrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run: usize,
    /// Time index whose update failed.
    pub step: usize,
    pub message: String,
}

enum Engine {
    Kalman(FilterState),
    Particle(ParticleEnsemble, Box<rand_chacha::ChaCha8Rng>),
}

impl Engine {
    fn start<M: StochasticModel + ?Sized>(
        filter: FilterId,
        setup: &Setup<'_, M>,
        run: usize,
    ) -> hybrid_kf::Result<Self> {
        Ok(match filter {
            FilterId::Kalman(_) => Engine::Kalman(FilterState::new(setup.init.clone(), 0)),
            FilterId::Particle(p) => {
                let mut rng = seeds::stream(setup.seed, run as u64, filter.lane());
                let cov = p.filter().map(|_| setup.pf_cov);
                let ens =
                    ParticleEnsemble::from_belief(setup.init, setup.particles, cov, &mut rng)?;
                Engine::Particle(ens, Box::new(rng))
            }
        })
    }

    /// Advances from `t` to `t + 1`; returns the posterior mean and covariance.
    fn step<M: StochasticModel + ?Sized>(
        &mut self,
        filter: FilterId,
        setup: &Setup<'_, M>,
        t: usize,
        u: &Vector,
        y: &Vector,
    ) -> hybrid_kf::Result<(Vector, Matrix)> {
        match (self, filter) {
            (Engine::Kalman(state), FilterId::Kalman(kind)) => {
                *state = kind.step(state, setup.model, u, y, setup.opts)?;
                Ok((state.mean().clone(), state.cov().clone()))
            }
            (Engine::Particle(ens, rng), FilterId::Particle(p)) => {
                let out = pf_step(ens, setup.model, u, y, t as u64, p, setup.opts, &mut **rng)?;
                let cov = weighted_cov(&out.ensemble, &out.estimate);
                *ens = out.ensemble;
                Ok((out.estimate, cov))
            }
            _ => unreachable!("engine matches its filter"),
        }
    }
}

fn weighted_cov(ens: &ParticleEnsemble, mean: &Vector) -> Matrix {
    let n = mean.len();
    let mut cov = Matrix::zeros(n, n);
    for (p, w) in ens.particles().iter().zip(ens.weights()) {
        let d = p - mean;
        cov += &d * d.transpose() * *w;
    }
    cov
}

/// Runs `filter` over one sequence. Panics if the consumed sequence does not
/// hash to the truth digest.
pub fn run_filter<M: StochasticModel + Sync + ?Sized>(
    filter: FilterId,
    setup: &Setup<'_, M>,
    truth: &Truth,
    run: usize,
) -> Result<Estimates, RunFailure> {
    let fail = |step: usize, e: hybrid_kf::Error| RunFailure {
        run,
        step,
        message: e.to_string(),
    };
    let mut engine = Engine::start(filter, setup, run).map_err(|e| fail(0, e))?;
    let mut hasher = SequenceHasher::default();
    let mut out = Estimates {
        means: Vec::with_capacity(truth.horizon()),
        covs: Vec::with_capacity(truth.horizon()),
    };
    for (t, (u, y)) in truth.inputs.iter().zip(&truth.measurements).enumerate() {
        hasher.feed(u, y);
        let (m, c) = engine
            .step(filter, setup, t, u, y)
            .map_err(|e| fail(t + 1, e))?;
        if m.iter().any(|v| !v.is_finite()) {
            return Err(fail(
                t + 1,
                hybrid_kf::Error::NonFinite("posterior mean".into()),
            ));
        }
        out.means.push(m);
        out.covs.push(c);
    }
    assert_eq!(
        hasher.finish(),
        truth.digest(),
        "{filter} consumed a different sequence in run {run}"
    );
    Ok(out)
}

/// Runs `filter` on every truth in parallel; results are in run order.
pub fn run_all<M: StochasticModel + Sync + ?Sized>(
    filter: FilterId,
    setup: &Setup<'_, M>,
    truths: &[Truth],
) -> Vec<Result<Estimates, RunFailure>> {
    truths
        .par_iter()
        .enumerate()
        .map(|(run, truth)| run_filter(filter, setup, truth, run))
        .collect()
}

/// Median per-step and total filter time over the given runs, after one
/// untimed warm-up run. Steps of failed runs up to the failure are counted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub median_step_seconds: f64,
    pub total_seconds: f64,
}

pub fn time_filter<M: StochasticModel + ?Sized>(
    filter: FilterId,
    setup: &Setup<'_, M>,
    truths: &[Truth],
) -> Option<Timing> {
    let first = truths.first()?;
    let mut steps = Vec::new();
    for (run, truth) in std::iter::once(first).chain(truths).enumerate() {
        let warmup = run == 0;
        let Ok(mut engine) = Engine::start(filter, setup, run.saturating_sub(1)) else {
            continue;
        };
        for (t, (u, y)) in truth.inputs.iter().zip(&truth.measurements).enumerate() {
            let start = Instant::now();
            let ok = engine.step(filter, setup, t, u, y).is_ok();
            let elapsed = start.elapsed().as_secs_f64();
            if !warmup {
                steps.push(elapsed);
            }
            if !ok {
                break;
            }
        }
    }
    if steps.is_empty() {
        return None;
    }
    let total = steps.iter().sum();
    steps.sort_by(f64::total_cmp);
    Some(Timing {
        median_step_seconds: median_sorted(&steps),
        total_seconds: total,
    })
}

pub fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Mean and standard error of the mean; `None` for an empty slice.
pub fn mean_and_se(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (Some(mean), None);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some((var / n).sqrt()))
}

/// Mean over `t` of the squared error in state component `i`.
pub fn component_mse(est: &Estimates, truth: &Truth, i: usize) -> f64 {
    let sum: f64 = est
        .means
        .iter()
        .zip(&truth.states)
        .map(|(m, x)| (m[i] - x[i]) * (m[i] - x[i]))
        .sum();
    sum / est.means.len() as f64
}

/// SHA-256 over the per-run sequence digests.
pub fn combined_digest(truths: &[Truth]) -> String {
    let mut h = Sha256::new();
    for t in truths {
        h.update(t.digest());
    }
    hex::encode(h.finalize())
}

/// Per-run scores derived from a filter's estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    pub mse: f64,
    pub param_mse: Option<f64>,
    pub convergence: Option<f64>,
}

/// Runs every configured filter over all truths, then times each filter in
/// a serialized phase over the first `timing_runs` truths.
pub fn evaluate<M, F>(
    cfg: &ExperimentConfig,
    setup: &Setup<'_, M>,
    truths: &[Truth],
    metrics: F,
) -> Vec<FilterResult>
where
    M: StochasticModel + Sync + ?Sized,
    F: Fn(&Estimates, &Truth) -> RunMetrics,
{
    let mut results = Vec::with_capacity(cfg.filters.len());
    for &filter in &cfg.filters {
        let mut res = FilterResult::new(filter, truths.len());
        let mut mse = Vec::new();
        let mut param = Vec::new();
        let mut conv = Vec::new();
        for (outcome, truth) in run_all(filter, setup, truths).into_iter().zip(truths) {
            match outcome {
                Ok(est) => {
                    let m = metrics(&est, truth);
                    mse.push(m.mse);
                    param.extend(m.param_mse);
                    conv.extend(m.convergence);
                }
                Err(f) => res.record_failure(f),
            }
        }
        (res.mse_mean, res.mse_std_error) = mean_and_se(&mse);
        (res.param_mse_mean, res.param_mse_std_error) = mean_and_se(&param);
        res.mass_convergence = mean_and_se(&conv).0;
        results.push(res);
    }
    let timed = &truths[..cfg.timing_runs.min(truths.len())];
    for res in &mut results {
        if let Some(t) = time_filter(res.filter, setup, timed) {
            res.median_step_seconds = Some(t.median_step_seconds);
            res.total_seconds = Some(t.total_seconds);
        }
    }
    results
}

/// Per-step truth, estimate, error and posterior variance of the listed
/// state components for every configured filter on one run, as CSV.
pub fn trace_csv<M: StochasticModel + Sync + ?Sized>(
    filters: &[FilterId],
    setup: &Setup<'_, M>,
    truth: &Truth,
    run: usize,
    components: &[(usize, &str)],
) -> String {
    let mut out = String::from("filter,t,component,truth,estimate,error,variance\r\n");
    for &filter in filters {
        match run_filter(filter, setup, truth, run) {
            Ok(est) => {
                for (t, ((m, c), x)) in est
                    .means
                    .iter()
                    .zip(&est.covs)
                    .zip(&truth.states)
                    .enumerate()
                {
                    for &(i, name) in components {
                        out.push_str(&format!(
                            "{filter},{},{name},{},{},{},{}\r\n",
                            t + 1,
                            x[i],
                            m[i],
                            m[i] - x[i],
                            c[(i, i)]
                        ));
                    }
                }
            }
            Err(f) => out.push_str(&format!("{filter},{},failed,,,,\r\n", f.step)),
        }
    }
    out
}
