//! Sequential importance resampling with pluggable proposals.
//!
//! Weights are carried in the log domain and normalized with log-sum-exp.
//! Resampling is systematic and triggered when the effective sample size
//! drops below `N/2`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{FilterKind, FilterOptions, FilterState};
use crate::gaussian::{GaussianBelief, Matrix, Vector};
use crate::models::StochasticModel;

/// Tolerance on `Σw = 1` accepted by [`systematic_resample`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Draw from `Gamma(shape, scale)` (scale parameterization) using the
/// Marsaglia–Tsang squeeze method, with the `U^{1/shape}` boost for
/// `shape < 1`.
pub fn gamma_sample<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gamma shape and scale must be positive, got ({shape}, {scale})"
        )));
    }
    let dist = Gamma::new(shape, scale).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(dist.sample(rng))
}

/// `1 / Σ w²`.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Systematic resampling of `weights.len()` indices with offset `u0`.
pub fn systematic_resample(weights: &[f64], u0: f64) -> Result<Vec<usize>> {
    systematic_resample_n(weights, weights.len(), u0)
}

/// Systematic resampling of `count` indices: positions `(i + u0)/count`
/// are located on the cumulative weight sum.
pub fn systematic_resample_n(weights: &[f64], count: usize, u0: f64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&u0) {
        return Err(Error::InvalidParameter(format!(
            "u0 must lie in [0, 1), got {u0}"
        )));
    }
    if weights.is_empty() {
        return Err(Error::InvalidParameter("no weights to resample".into()));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter(
            "weights must be finite and non-negative".into(),
        ));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::Unnormalized(total));
    }
    let last = weights.len() - 1;
    let mut out = Vec::with_capacity(count);
    let mut idx = 0;
    let mut cumulative = weights[0];
    for i in 0..count {
        let pos = (i as f64 + u0) / count as f64;
        while pos >= cumulative && idx < last {
            idx += 1;
            cumulative += weights[idx];
        }
        out.push(idx);
    }
    Ok(out)
}

/// Normalizes log-weights in place and returns the linear weights.
fn normalize_log_weights(log_weights: &mut [f64]) -> Result<Vec<f64>> {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::WeightUnderflow);
    }
    let total: f64 = log_weights.iter().map(|lw| (lw - max).exp()).sum();
    let log_total = max + total.ln();
    let mut weights = Vec::with_capacity(log_weights.len());
    for lw in log_weights.iter_mut() {
        *lw -= log_total;
        weights.push(lw.exp());
    }
    Ok(weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProposalKind {
    #[serde(rename = "PF")]
    Prior,
    #[serde(rename = "PF-EKF")]
    Ekf,
    #[serde(rename = "PF-UKF")]
    Ukf,
    #[serde(rename = "PF-NewKF")]
    NewKf,
}

impl ProposalKind {
    pub const ALL: [ProposalKind; 4] = [
        ProposalKind::Prior,
        ProposalKind::Ekf,
        ProposalKind::Ukf,
        ProposalKind::NewKf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProposalKind::Prior => "PF",
            ProposalKind::Ekf => "PF-EKF",
            ProposalKind::Ukf => "PF-UKF",
            ProposalKind::NewKf => "PF-NewKF",
        }
    }

    /// The Kalman filter generating the proposal, if any.
    pub fn filter(self) -> Option<FilterKind> {
        match self {
            ProposalKind::Prior => None,
            ProposalKind::Ekf => Some(FilterKind::Ekf),
            ProposalKind::Ukf => Some(FilterKind::Ukf),
            ProposalKind::NewKf => Some(FilterKind::NewKf),
        }
    }
}

impl fmt::Display for ProposalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProposalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "pf" | "prior" => Ok(ProposalKind::Prior),
            "pfekf" => Ok(ProposalKind::Ekf),
            "pfukf" => Ok(ProposalKind::Ukf),
            "pfnewkf" => Ok(ProposalKind::NewKf),
            _ => Err(Error::InvalidParameter(format!(
                "unknown particle filter {s:?}"
            ))),
        }
    }
}

/// Weighted particle set. `covs` holds the per-particle covariance used by
/// Kalman-filter proposals.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    particles: Vec<Vector>,
    log_weights: Vec<f64>,
    weights: Vec<f64>,
    covs: Option<Vec<Matrix>>,
}

impl ParticleEnsemble {
    /// `count` particles drawn from `init`, uniformly weighted. When
    /// `proposal_cov` is given, every particle carries that covariance.
    pub fn from_belief<R: Rng + ?Sized>(
        init: &GaussianBelief,
        count: usize,
        proposal_cov: Option<&Matrix>,
        rng: &mut R,
    ) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidParameter(
                "particle count must be positive".into(),
            ));
        }
        let l = crate::gaussian::matrix_sqrt(init.cov())?;
        let particles = (0..count).map(|_| init.sample_with_sqrt(&l, rng)).collect();
        Self::new(particles, proposal_cov.map(|p| vec![p.clone(); count]))
    }

    /// Uniformly weighted ensemble.
    pub fn new(particles: Vec<Vector>, covs: Option<Vec<Matrix>>) -> Result<Self> {
        let n = particles.len();
        if n == 0 {
            return Err(Error::InvalidParameter(
                "particle count must be positive".into(),
            ));
        }
        if let Some(c) = &covs {
            crate::error::check_dim("per-particle covariances", n, c.len())?;
        }
        let w = 1.0 / n as f64;
        Ok(Self {
            particles,
            log_weights: vec![w.ln(); n],
            weights: vec![w; n],
            covs,
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Vector] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn covs(&self) -> Option<&[Matrix]> {
        self.covs.as_deref()
    }

    pub fn effective_sample_size(&self) -> f64 {
        effective_sample_size(&self.weights)
    }

    /// Weighted mean `Σ wᵢ xᵢ`.
    pub fn mean(&self) -> Vector {
        let mut m = Vector::zeros(self.particles[0].len());
        for (w, x) in self.weights.iter().zip(&self.particles) {
            m.axpy(*w, x, 1.0);
        }
        m
    }

    /// Replaces the ensemble by the particles at `indices`, uniformly
    /// weighted.
    fn resample_indices(&mut self, indices: &[usize]) {
        self.particles = indices.iter().map(|&i| self.particles[i].clone()).collect();
        if let Some(covs) = &self.covs {
            self.covs = Some(indices.iter().map(|&i| covs[i].clone()).collect());
        }
        let w = 1.0 / indices.len() as f64;
        self.log_weights = vec![w.ln(); indices.len()];
        self.weights = vec![w; indices.len()];
    }
}

/// Outcome of one particle-filter step.
#[derive(Debug, Clone)]
pub struct PfStepOutput {
    pub ensemble: ParticleEnsemble,
    /// Weighted mean before resampling.
    pub estimate: Vector,
    pub effective_sample_size: f64,
    pub resampled: bool,
    /// Particles whose Kalman proposal failed and fell back to the prior.
    pub fallbacks: usize,
}

/// Gaussian proposal from one step of `kind` started at `(particle, cov)`.
#[allow(clippy::too_many_arguments)]
pub fn kf_proposal<M: StochasticModel + ?Sized>(
    particle: &Vector,
    cov: &Matrix,
    model: &M,
    u: &Vector,
    y: &Vector,
    prev_step: u64,
    kind: FilterKind,
    opts: &FilterOptions,
) -> Result<GaussianBelief> {
    let state = FilterState::new(
        GaussianBelief::new(particle.clone(), cov.clone())?,
        prev_step,
    );
    Ok(kind.step(&state, model, u, y, opts)?.belief)
}

/// Advances the ensemble from index `prev_step` to `prev_step + 1` given
/// the measurement `y` taken at the new index.
#[allow(clippy::too_many_arguments)]
pub fn pf_step<M, R>(
    ensemble: &ParticleEnsemble,
    model: &M,
    u: &Vector,
    y: &Vector,
    prev_step: u64,
    proposal: ProposalKind,
    opts: &FilterOptions,
    rng: &mut R,
) -> Result<PfStepOutput>
where
    M: StochasticModel + ?Sized,
    R: Rng,
{
    let t = prev_step + 1;
    let n = ensemble.len();
    let filter = proposal.filter();
    if filter.is_some() && ensemble.covs.is_none() {
        return Err(Error::InvalidParameter(format!(
            "{proposal} needs per-particle covariances"
        )));
    }
    let mut particles = Vec::with_capacity(n);
    let mut log_weights = Vec::with_capacity(n);
    let mut covs = ensemble.covs.as_ref().map(|_| Vec::with_capacity(n));
    let mut fallbacks = 0;

    for i in 0..n {
        let prev = &ensemble.particles[i];
        let mut increment = 0.0;
        let gaussian = match filter {
            None => None,
            Some(kind) => {
                let cov = &ensemble.covs.as_ref().expect("checked above")[i];
                match kf_proposal(prev, cov, model, u, y, prev_step, kind, opts) {
                    Ok(belief) => Some(belief),
                    Err(_) => {
                        fallbacks += 1;
                        None
                    }
                }
            }
        };
        let x = match &gaussian {
            Some(belief) => {
                let x = belief.sample(rng)?;
                increment +=
                    model.transition_log_density(&x, prev, u, prev_step) - belief.log_density(&x);
                x
            }
            None => model.sample_transition(prev, u, prev_step, rng)?,
        };
        increment += model.measurement_log_likelihood(y, &x, t)?;
        if let Some(covs) = covs.as_mut() {
            let carried = match &gaussian {
                Some(belief) => belief.cov().clone(),
                None => ensemble.covs.as_ref().expect("checked above")[i].clone(),
            };
            covs.push(carried);
        }
        let lw = ensemble.log_weights[i] + increment;
        log_weights.push(if lw.is_nan() { f64::NEG_INFINITY } else { lw });
        particles.push(x);
    }

    let weights = normalize_log_weights(&mut log_weights)?;
    let mut next = ParticleEnsemble {
        particles,
        log_weights,
        weights,
        covs,
    };
    let estimate = next.mean();
    let ess = next.effective_sample_size();
    let resampled = ess < n as f64 / 2.0;
    if resampled {
        let u0: f64 = rng.random();
        let indices = systematic_resample(&next.weights, u0)?;
        next.resample_indices(&indices);
    }
    Ok(PfStepOutput {
        ensemble: next,
        estimate,
        effective_sample_size: ess,
        resampled,
        fallbacks,
    })
}
