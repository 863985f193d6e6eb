use crate::error::Result;
use crate::filters::unscented::{propagated_belief, unscented_measurement, PointRule};
use crate::filters::{
    check_inputs, transition_jacobian, unscented_update, FilterOptions, FilterState,
};
use crate::gaussian::{symmetric_sigma_points, GaussianBelief, Vector};
use crate::models::SystemModel;

/// Only the center point goes through `f`; the others use the first-order
/// expansion `f(χ₀) + F (χᵢ − χ₀)`.
pub fn spukf_predict<M: SystemModel + ?Sized>(
    state: &FilterState,
    model: &M,
    u: &Vector,
    opts: &FilterOptions,
) -> Result<GaussianBelief> {
    let t = state.step;
    let set = symmetric_sigma_points(&state.belief, &opts.ut)?;
    let center = set.center();
    let f0 = model.transition(center, u, t)?;
    let jac = transition_jacobian(model, center, u, t, opts)?;
    let propagated: Vec<Vector> = set
        .points
        .iter()
        .map(|p| &f0 + &jac * (p - center))
        .collect();
    propagated_belief(&set, &propagated, model)
}

pub fn spukf_step<M: SystemModel + ?Sized>(
    state: &FilterState,
    model: &M,
    u: &Vector,
    y: &Vector,
    opts: &FilterOptions,
) -> Result<FilterState> {
    check_inputs(state, model, y)?;
    let prior = spukf_predict(state, model, u, opts)?;
    let t = state.step + 1;
    let predicted = unscented_measurement(&prior, model, t, opts, PointRule::Symmetric)?;
    Ok(FilterState::new(
        unscented_update(&prior, &predicted, y)?,
        t,
    ))
}
