use crate::error::Result;
use crate::filters::{
    check_inputs, linearized_covariance, linearized_measurement, linearized_update,
    measurement_jacobian, psd_belief, transition_jacobian, FilterOptions, FilterState,
};
use crate::gaussian::{
    symmetric_sigma_points, unscented_mean, GaussianBelief, SigmaPointSet, Vector,
};
use crate::models::SystemModel;

/// Prediction of the hybrid filter: the prior plus the sigma points after
/// `f`, which are reused for the measurement mean.
#[derive(Debug, Clone)]
pub struct HybridPrediction {
    pub prior: GaussianBelief,
    pub set: SigmaPointSet,
    pub propagated: Vec<Vector>,
}

/// Unscented mean of `f`, linearized covariance `F P Fᵀ + Q`.
pub fn newkf_predict<M: SystemModel + ?Sized>(
    state: &FilterState,
    model: &M,
    u: &Vector,
    opts: &FilterOptions,
) -> Result<HybridPrediction> {
    let t = state.step;
    let set = symmetric_sigma_points(&state.belief, &opts.ut)?;
    let propagated = set.map(|p| model.transition(p, u, t))?;
    let mean = unscented_mean(&set, &propagated)?;
    let jac = transition_jacobian(model, state.mean(), u, t, opts)?;
    let cov = linearized_covariance(&jac, state.cov(), model.process_noise());
    Ok(HybridPrediction {
        prior: psd_belief(mean, cov)?,
        set,
        propagated,
    })
}

pub fn newkf_step<M: SystemModel + ?Sized>(
    state: &FilterState,
    model: &M,
    u: &Vector,
    y: &Vector,
    opts: &FilterOptions,
) -> Result<FilterState> {
    check_inputs(state, model, y)?;
    let HybridPrediction {
        prior,
        set,
        propagated,
    } = newkf_predict(state, model, u, opts)?;
    let t = state.step + 1;
    let z = propagated
        .iter()
        .map(|p| model.measure(p, t))
        .collect::<Result<Vec<_>>>()?;
    let y_pred = unscented_mean(&set, &z)?;
    let h = measurement_jacobian(model, prior.mean(), t, opts)?;
    let r = model.measurement_noise();
    let predicted = linearized_measurement(&prior, y_pred, &h, r);
    let posterior = linearized_update(&prior, &predicted, &h, r, y, opts)?;
    Ok(FilterState::new(posterior, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::ekf_predict;
    use crate::gaussian::UtParams;
    use crate::models::{polynomial_test_model, CountingModel};

    #[test]
    fn square_prediction_is_hybrid() {
        let model = polynomial_test_model(&[1.0, 0.0, 0.0], 0.0, 1.0).unwrap();
        let state = FilterState::new(GaussianBelief::scalar(1.0, 0.01).unwrap(), 0);
        let opts = FilterOptions {
            ut: UtParams::with_lambda(2.0),
            ..Default::default()
        };
        let u = Vector::zeros(0);
        let pred = newkf_predict(&state, &model, &u, &opts).unwrap();
        assert!((pred.prior.mean()[0] - 1.01).abs() < 1e-12);
        assert!((pred.prior.cov()[(0, 0)] - 0.04).abs() < 1e-15);
        let ekf = ekf_predict(&state, &model, &u, &opts).unwrap();
        assert_eq!(ekf.mean()[0], 1.0);
        assert_eq!(
            ekf.cov()[(0, 0)].to_bits(),
            pred.prior.cov()[(0, 0)].to_bits()
        );
    }

    #[test]
    fn one_sigma_draw_per_step() {
        let model = polynomial_test_model(&[0.5, 1.0, 0.0], 0.1, 0.2).unwrap();
        let counting = CountingModel::new(&model);
        let state = FilterState::new(GaussianBelief::scalar(0.3, 0.5).unwrap(), 0);
        let before = crate::gaussian::sqrt_call_count();
        newkf_step(
            &state,
            &counting,
            &Vector::zeros(0),
            &Vector::from_element(1, 0.4),
            &FilterOptions::default(),
        )
        .unwrap();
        assert_eq!(crate::gaussian::sqrt_call_count() - before, 1);
        let c = counting.counts();
        assert_eq!(
            (
                c.transition,
                c.measure,
                c.transition_jacobian,
                c.measurement_jacobian
            ),
            (3, 3, 1, 1)
        );
    }
}
