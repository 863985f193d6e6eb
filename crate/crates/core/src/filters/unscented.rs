use crate::error::Result;
use crate::filters::{
    check_inputs, psd_belief, unscented_update, FilterOptions, FilterState, PredictedMeasurement,
};
use crate::gaussian::{
    spherical_simplex_points, symmetric_sigma_points, unscented_covariance,
    unscented_cross_covariance, unscented_mean, GaussianBelief, SigmaPointSet, Vector,
};
use crate::models::SystemModel;

#[derive(Debug, Clone, Copy)]
pub(crate) enum PointRule {
    Symmetric,
    Simplex,
}

impl PointRule {
    pub(crate) fn build(
        self,
        belief: &GaussianBelief,
        opts: &FilterOptions,
    ) -> Result<SigmaPointSet> {
        match self {
            PointRule::Symmetric => symmetric_sigma_points(belief, &opts.ut),
            PointRule::Simplex => spherical_simplex_points(belief, &opts.ut),
        }
    }
}

/// Unscented mean and covariance (plus `Q`) of already-propagated points.
pub(crate) fn propagated_belief<M: SystemModel + ?Sized>(
    set: &SigmaPointSet,
    propagated: &[Vector],
    model: &M,
) -> Result<GaussianBelief> {
    let mean = unscented_mean(set, propagated)?;
    let cov = unscented_covariance(set, propagated, &mean)? + model.process_noise();
    psd_belief(mean, cov)
}

fn predict<M: SystemModel + ?Sized>(
    state: &FilterState,
    model: &M,
    u: &Vector,
    opts: &FilterOptions,
    rule: PointRule,
) -> Result<GaussianBelief> {
    let set = rule.build(&state.belief, opts)?;
    let t = state.step;
    let propagated = set.map(|p| model.transition(p, u, t))?;
    propagated_belief(&set, &propagated, model)
}

/// Measurement moments from points redrawn around the predicted belief.
pub(crate) fn unscented_measurement<M: SystemModel + ?Sized>(
    prior: &GaussianBelief,
    model: &M,
    t: u64,
    opts: &FilterOptions,
    rule: PointRule,
) -> Result<PredictedMeasurement> {
    let set = rule.build(prior, opts)?;
    let z = set.map(|p| model.measure(p, t))?;
    let mean = unscented_mean(&set, &z)?;
    let innovation_cov = unscented_covariance(&set, &z, &mean)? + model.measurement_noise();
    let cross_cov = unscented_cross_covariance(&set, prior.mean(), &z, &mean)?;
    Ok(PredictedMeasurement {
        mean,
        innovation_cov,
        cross_cov,
    })
}

fn step<M: SystemModel + ?Sized>(
    state: &FilterState,
    model: &M,
    u: &Vector,
    y: &Vector,
    opts: &FilterOptions,
    rule: PointRule,
) -> Result<FilterState> {
    check_inputs(state, model, y)?;
    let prior = predict(state, model, u, opts, rule)?;
    let t = state.step + 1;
    let predicted = unscented_measurement(&prior, model, t, opts, rule)?;
    Ok(FilterState::new(
        unscented_update(&prior, &predicted, y)?,
        t,
    ))
}

pub fn ukf_predict<M: SystemModel + ?Sized>(
    state: &FilterState,
    model: &M,
    u: &Vector,
    opts: &FilterOptions,
) -> Result<GaussianBelief> {
    predict(state, model, u, opts, PointRule::Symmetric)
}

pub fn ukf_step<M: SystemModel + ?Sized>(
    state: &FilterState,
    model: &M,
    u: &Vector,
    y: &Vector,
    opts: &FilterOptions,
) -> Result<FilterState> {
    step(state, model, u, y, opts, PointRule::Symmetric)
}

pub fn ssukf_predict<M: SystemModel + ?Sized>(
    state: &FilterState,
    model: &M,
    u: &Vector,
    opts: &FilterOptions,
) -> Result<GaussianBelief> {
    predict(state, model, u, opts, PointRule::Simplex)
}

pub fn ssukf_step<M: SystemModel + ?Sized>(
    state: &FilterState,
    model: &M,
    u: &Vector,
    y: &Vector,
    opts: &FilterOptions,
) -> Result<FilterState> {
    step(state, model, u, y, opts, PointRule::Simplex)
}
