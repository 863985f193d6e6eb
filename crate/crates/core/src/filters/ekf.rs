use crate::error::Result;
use crate::filters::{
    check_inputs, linearized_covariance, linearized_measurement, linearized_update,
    measurement_jacobian, psd_belief, transition_jacobian, FilterOptions, FilterState,
};
use crate::gaussian::{GaussianBelief, Vector};
use crate::models::SystemModel;

/// `x̂⁻ = f(x̂)`, `P⁻ = F P Fᵀ + Q` with `F` taken at the posterior mean.
pub fn ekf_predict<M: SystemModel + ?Sized>(
    state: &FilterState,
    model: &M,
    u: &Vector,
    opts: &FilterOptions,
) -> Result<GaussianBelief> {
    let t = state.step;
    let x = state.mean();
    let mean = model.transition(x, u, t)?;
    let jac = transition_jacobian(model, x, u, t, opts)?;
    psd_belief(
        mean,
        linearized_covariance(&jac, state.cov(), model.process_noise()),
    )
}

pub fn ekf_step<M: SystemModel + ?Sized>(
    state: &FilterState,
    model: &M,
    u: &Vector,
    y: &Vector,
    opts: &FilterOptions,
) -> Result<FilterState> {
    check_inputs(state, model, y)?;
    let prior = ekf_predict(state, model, u, opts)?;
    let t = state.step + 1;
    let y_pred = model.measure(prior.mean(), t)?;
    let h = measurement_jacobian(model, prior.mean(), t, opts)?;
    let r = model.measurement_noise();
    let predicted = linearized_measurement(&prior, y_pred, &h, r);
    let posterior = linearized_update(&prior, &predicted, &h, r, y, opts)?;
    Ok(FilterState::new(posterior, t))
}
