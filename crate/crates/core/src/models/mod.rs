//! Discrete-time nonlinear systems.
//!
//! Time-index convention: `transition(x, u, t)` maps the state at index `t`
//! to the state at `t + 1`, and `measure(x, t)` is the observation of the
//! state at index `t`. A filter estimating `x_k` therefore calls
//! `transition(·, u, k − 1)` followed by `measure(·, k)`.

mod linear;
mod maglev;
mod polynomial;
mod timeseries;

use std::sync::atomic::{AtomicU64, Ordering};

use rand::RngCore;

use crate::error::{Error, Result};
use crate::gaussian::{gaussian_log_density, Matrix, Vector};

pub use linear::LinearModel;
pub use maglev::{GapController, MaglevConstants, MaglevModel};
pub use polynomial::{polynomial_test_model, PolynomialModel};
pub use timeseries::{TimeSeriesModel, TimeSeriesParams};

/// A nonlinear system `x_{t+1} = f(x_t, u, t) + w`, `y_t = h(x_t, t) + v`.
pub trait SystemModel: Send + Sync {
    fn state_dim(&self) -> usize;
    fn measurement_dim(&self) -> usize;

    /// Deterministic part of the transition, `f`.
    fn transition(&self, x: &Vector, u: &Vector, t: u64) -> Result<Vector>;

    /// Noise-free measurement, `h`.
    fn measure(&self, x: &Vector, t: u64) -> Result<Vector>;

    /// Jacobian of `f` with respect to the state. Defaults to central
    /// differences.
    fn transition_jacobian(&self, x: &Vector, u: &Vector, t: u64) -> Result<Matrix> {
        numeric_jacobian(|z| self.transition(z, u, t), x)
    }

    /// Jacobian of `h`. Defaults to central differences.
    fn measurement_jacobian(&self, x: &Vector, t: u64) -> Result<Matrix> {
        numeric_jacobian(|z| self.measure(z, t), x)
    }

    /// Whether the Jacobian methods are closed-form.
    fn has_analytic_jacobians(&self) -> bool {
        false
    }

    /// `Q`.
    fn process_noise(&self) -> &Matrix;

    /// `R`.
    fn measurement_noise(&self) -> &Matrix;
}

/// A system whose exact (possibly non-Gaussian) transition noise can be
/// sampled and evaluated, as needed by particle filters.
pub trait StochasticModel: SystemModel {
    fn sample_transition(
        &self,
        x: &Vector,
        u: &Vector,
        t: u64,
        rng: &mut dyn RngCore,
    ) -> Result<Vector>;

    /// `log p(next | x)`; `-inf` outside the support.
    fn transition_log_density(&self, next: &Vector, x: &Vector, u: &Vector, t: u64) -> f64;

    /// `log p(y | x)` under the Gaussian measurement noise `R`.
    fn measurement_log_likelihood(&self, y: &Vector, x: &Vector, t: u64) -> Result<f64> {
        let predicted = self.measure(x, t)?;
        Ok(gaussian_log_density(
            &(y - predicted),
            self.measurement_noise(),
        ))
    }
}

/// `f(x) + L z` with `L Lᵀ = Q`, `z ~ N(0, I)`: transition sampling for
/// models whose process noise is additive Gaussian.
pub(crate) fn sample_additive_gaussian<M: SystemModel + ?Sized>(
    model: &M,
    x: &Vector,
    u: &Vector,
    t: u64,
    rng: &mut dyn RngCore,
) -> Result<Vector> {
    let mean = model.transition(x, u, t)?;
    let belief = crate::gaussian::GaussianBelief::new(mean, model.process_noise().clone())?;
    belief.sample(rng)
}

/// Central-difference Jacobian with per-coordinate step
/// `cbrt(ε)·max(1, |x_i|)`.
pub fn numeric_jacobian<F>(f: F, x: &Vector) -> Result<Matrix>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let step_base = f64::EPSILON.cbrt();
    let mut jac: Option<Matrix> = None;
    let mut probe = x.clone();
    for i in 0..x.len() {
        let h = step_base * x[i].abs().max(1.0);
        probe[i] = x[i] + h;
        let plus = f(&probe)?;
        probe[i] = x[i] - h;
        let minus = f(&probe)?;
        probe[i] = x[i];
        if plus.iter().chain(minus.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "function output while differentiating coordinate {i}"
            )));
        }
        let jac = jac.get_or_insert_with(|| Matrix::zeros(plus.len(), x.len()));
        let column = (plus - minus) / (2.0 * h);
        jac.set_column(i, &column);
    }
    Ok(jac.unwrap_or_else(|| Matrix::zeros(0, 0)))
}

/// One classical fourth-order Runge–Kutta step of `ẋ = deriv(x, u, t)`.
pub fn rk4_step<F>(deriv: F, x: &Vector, u: &Vector, t: f64, dt: f64) -> Result<Vector>
where
    F: Fn(&Vector, &Vector, f64) -> Result<Vector>,
{
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rk4 step must be positive, got {dt}"
        )));
    }
    let half = 0.5 * dt;
    let k1 = deriv(x, u, t)?;
    let k2 = deriv(&(x + &k1 * half), u, t + half)?;
    let k3 = deriv(&(x + &k2 * half), u, t + half)?;
    let k4 = deriv(&(x + &k3 * dt), u, t + dt)?;
    for (stage, k) in [&k1, &k2, &k3, &k4].into_iter().enumerate() {
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("rk4 stage {}", stage + 1)));
        }
    }
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Call counts recorded by [`CountingModel`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CallCounts {
    pub transition: u64,
    pub measure: u64,
    pub transition_jacobian: u64,
    pub measurement_jacobian: u64,
}

/// Wraps a model and counts how often each function is evaluated.
pub struct CountingModel<'a, M: ?Sized> {
    inner: &'a M,
    transition: AtomicU64,
    measure: AtomicU64,
    transition_jacobian: AtomicU64,
    measurement_jacobian: AtomicU64,
}

impl<'a, M: SystemModel + ?Sized> CountingModel<'a, M> {
    pub fn new(inner: &'a M) -> Self {
        Self {
            inner,
            transition: AtomicU64::new(0),
            measure: AtomicU64::new(0),
            transition_jacobian: AtomicU64::new(0),
            measurement_jacobian: AtomicU64::new(0),
        }
    }

    pub fn counts(&self) -> CallCounts {
        CallCounts {
            transition: self.transition.load(Ordering::Relaxed),
            measure: self.measure.load(Ordering::Relaxed),
            transition_jacobian: self.transition_jacobian.load(Ordering::Relaxed),
            measurement_jacobian: self.measurement_jacobian.load(Ordering::Relaxed),
        }
    }

    pub fn reset(&self) {
        for c in [
            &self.transition,
            &self.measure,
            &self.transition_jacobian,
            &self.measurement_jacobian,
        ] {
            c.store(0, Ordering::Relaxed);
        }
    }
}

impl<M: SystemModel + ?Sized> SystemModel for CountingModel<'_, M> {
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }

    fn measurement_dim(&self) -> usize {
        self.inner.measurement_dim()
    }

    fn transition(&self, x: &Vector, u: &Vector, t: u64) -> Result<Vector> {
        self.transition.fetch_add(1, Ordering::Relaxed);
        self.inner.transition(x, u, t)
    }

    fn measure(&self, x: &Vector, t: u64) -> Result<Vector> {
        self.measure.fetch_add(1, Ordering::Relaxed);
        self.inner.measure(x, t)
    }

    fn transition_jacobian(&self, x: &Vector, u: &Vector, t: u64) -> Result<Matrix> {
        self.transition_jacobian.fetch_add(1, Ordering::Relaxed);
        self.inner.transition_jacobian(x, u, t)
    }

    fn measurement_jacobian(&self, x: &Vector, t: u64) -> Result<Matrix> {
        self.measurement_jacobian.fetch_add(1, Ordering::Relaxed);
        self.inner.measurement_jacobian(x, t)
    }

    fn has_analytic_jacobians(&self) -> bool {
        self.inner.has_analytic_jacobians()
    }

    fn process_noise(&self) -> &Matrix {
        self.inner.process_noise()
    }

    fn measurement_noise(&self) -> &Matrix {
        self.inner.measurement_noise()
    }
}
