use hybrid_kf::cost::{measured_cost, newkf_flops, reduction_ratio, ukf_flops, CostModelInput};
use hybrid_kf::filters::{FilterKind, FilterOptions, FilterState};
use hybrid_kf::gaussian::{GaussianBelief, Vector};
use hybrid_kf::models::{TimeSeriesModel, TimeSeriesParams};
use hybrid_kf::particle::gamma_sample;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn time_series_inputs(steps: usize) -> (TimeSeriesModel, Vec<(Vector, Vector)>) {
    let model = TimeSeriesModel::new(TimeSeriesParams::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut x = 1.0;
    let inputs = (0..steps as u64)
        .map(|t| {
            x = model.process(x, t, gamma_sample(2.0, 3.0, &mut rng).unwrap());
            (
                Vector::zeros(0),
                Vector::from_element(1, model.observe(x, t + 1, 0.0)),
            )
        })
        .collect();
    (model, inputs)
}

#[test]
fn instrumented_counts_per_step() {
    let (model, inputs) = time_series_inputs(1100);
    let init = FilterState::new(GaussianBelief::scalar(1.0, 1e-3).unwrap(), 0);
    let opts = FilterOptions::default();
    // (f calls, h calls, Jacobians, square roots) for n = m = 1.
    let expected = [
        (FilterKind::Ekf, 1.0, 1.0, 2.0, 0.0),
        (FilterKind::Ukf, 3.0, 3.0, 0.0, 2.0),
        (FilterKind::NewKf, 3.0, 3.0, 2.0, 1.0),
        (FilterKind::Spukf, 1.0, 3.0, 1.0, 2.0),
        (FilterKind::Ssukf, 3.0, 3.0, 0.0, 2.0),
    ];
    for (kind, f, h, jac, chol) in expected {
        let c = measured_cost(kind, &model, &init, &inputs, 100, &opts).unwrap();
        assert_eq!(c.timed_steps, 1000);
        assert_eq!(
            (
                c.transition_calls_per_step,
                c.measure_calls_per_step,
                c.jacobian_calls_per_step,
                c.cholesky_calls_per_step
            ),
            (f, h, jac, chol),
            "{kind}"
        );
        assert!(c.median_step_seconds > 0.0 && c.iqr_step_seconds >= 0.0);
    }
}

#[test]
fn timing_protocol_minimums_enforced() {
    let (model, inputs) = time_series_inputs(500);
    let init = FilterState::new(GaussianBelief::scalar(1.0, 1e-3).unwrap(), 0);
    assert!(measured_cost(
        FilterKind::Ukf,
        &model,
        &init,
        &inputs,
        100,
        &FilterOptions::default()
    )
    .is_err());
}

proptest! {
    #[test]
    fn reduction_definition(n in 1u64..300, m in 1u64..300, j in 1u64..100_000) {
        let input = CostModelInput::new(n, m, j).unwrap();
        let (u, k) = (ukf_flops(&input), newkf_flops(&input));
        prop_assert!(u > k);
        prop_assert_eq!(reduction_ratio(&input), (u as f64 - k as f64) / u as f64);
    }
}
