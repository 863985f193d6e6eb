//! Scalar time series with Gamma process noise and a measurement model that
//! switches from quadratic to affine.
//!
//! ```text
//! x_{t+1} = 1 + sin(ω·π·t) + φ·x_t + v_t,        v_t ~ Gamma(shape, scale)
//! y_t     = φ·x_t² + n_t        (t ≤ switch_time)
//!         = φ·x_t − 2 + n_t     (t > switch_time),  n_t ~ N(0, obs_noise_var)
//! ```
//!
//! The Gaussian filters see `f(x) = 1 + sin(ωπt) + φx + E[v]` with
//! `Q = Var[v]`; particle filters sample the Gamma noise exactly.

use rand::RngCore;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::gaussian::{Matrix, Vector};
use crate::models::{StochasticModel, SystemModel};
use crate::particle::gamma_sample;

/// Noise variances used in place of zero when `noise_free` is set, so the
/// innovation covariance stays invertible.
const NOISE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesParams {
    pub omega: f64,
    pub phi: f64,
    pub gamma_shape: f64,
    pub gamma_scale: f64,
    pub obs_noise_var: f64,
    pub switch_time: u64,
    /// Drop both noise sources (truth and filter model alike).
    pub noise_free: bool,
}

impl Default for TimeSeriesParams {
    fn default() -> Self {
        Self {
            omega: 4e-2,
            phi: 0.5,
            gamma_shape: 2.0,
            gamma_scale: 3.0,
            obs_noise_var: 1e-5,
            switch_time: 30,
            noise_free: false,
        }
    }
}

impl TimeSeriesParams {
    pub fn validate(&self) -> Result<()> {
        if self.switch_time == 0 {
            return Err(Error::InvalidParameter(
                "switch_time must be positive".into(),
            ));
        }
        if !(self.gamma_shape > 0.0 && self.gamma_scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma shape and scale must be positive, got ({}, {})",
                self.gamma_shape, self.gamma_scale
            )));
        }
        if !(self.obs_noise_var >= 0.0) {
            return Err(Error::InvalidParameter(
                "obs_noise_var must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn gamma_mean(&self) -> f64 {
        self.gamma_shape * self.gamma_scale
    }

    pub fn gamma_variance(&self) -> f64 {
        self.gamma_shape * self.gamma_scale * self.gamma_scale
    }
}

#[derive(Debug, Clone)]
pub struct TimeSeriesModel {
    params: TimeSeriesParams,
    q: Matrix,
    r: Matrix,
}

impl TimeSeriesModel {
    pub fn new(params: TimeSeriesParams) -> Result<Self> {
        params.validate()?;
        let (q, r) = if params.noise_free {
            (NOISE_FLOOR, NOISE_FLOOR)
        } else {
            (
                params.gamma_variance(),
                params.obs_noise_var.max(NOISE_FLOOR),
            )
        };
        Ok(Self {
            params,
            q: Matrix::from_element(1, 1, q),
            r: Matrix::from_element(1, 1, r),
        })
    }

    pub fn params(&self) -> &TimeSeriesParams {
        &self.params
    }

    /// `1 + sin(ωπt) + φx + v`.
    pub fn process(&self, x: f64, t: u64, v: f64) -> f64 {
        let p = &self.params;
        1.0 + (p.omega * std::f64::consts::PI * t as f64).sin() + p.phi * x + v
    }

    /// Noisy observation; the quadratic branch covers `t ≤ switch_time`.
    pub fn observe(&self, x: f64, t: u64, noise: f64) -> f64 {
        let phi = self.params.phi;
        if self.is_quadratic(t) {
            phi * x * x + noise
        } else {
            phi * x - 2.0 + noise
        }
    }

    fn is_quadratic(&self, t: u64) -> bool {
        t <= self.params.switch_time
    }

    /// Mean of the noise term added by the Gaussian-filter view of `f`.
    fn noise_offset(&self) -> f64 {
        if self.params.noise_free {
            0.0
        } else {
            self.params.gamma_mean()
        }
    }

    fn scalar(x: &Vector) -> Result<f64> {
        if x.len() == 1 {
            Ok(x[0])
        } else {
            Err(Error::Dimension {
                context: "time series state",
                expected: 1,
                got: x.len(),
            })
        }
    }

    /// Exact Gamma log-density of the process noise `v`.
    fn noise_log_density(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let k = self.params.gamma_shape;
        let theta = self.params.gamma_scale;
        (k - 1.0) * v.ln() - v / theta - ln_gamma(k) - k * theta.ln()
    }
}

impl SystemModel for TimeSeriesModel {
    fn state_dim(&self) -> usize {
        1
    }

    fn measurement_dim(&self) -> usize {
        1
    }

    fn transition(&self, x: &Vector, _u: &Vector, t: u64) -> Result<Vector> {
        Ok(Vector::from_element(
            1,
            self.process(Self::scalar(x)?, t, self.noise_offset()),
        ))
    }

    fn measure(&self, x: &Vector, t: u64) -> Result<Vector> {
        Ok(Vector::from_element(
            1,
            self.observe(Self::scalar(x)?, t, 0.0),
        ))
    }

    fn transition_jacobian(&self, _x: &Vector, _u: &Vector, _t: u64) -> Result<Matrix> {
        Ok(Matrix::from_element(1, 1, self.params.phi))
    }

    fn measurement_jacobian(&self, x: &Vector, t: u64) -> Result<Matrix> {
        let x = Self::scalar(x)?;
        let d = if self.is_quadratic(t) {
            2.0 * self.params.phi * x
        } else {
            self.params.phi
        };
        Ok(Matrix::from_element(1, 1, d))
    }

    fn has_analytic_jacobians(&self) -> bool {
        true
    }

    fn process_noise(&self) -> &Matrix {
        &self.q
    }

    fn measurement_noise(&self) -> &Matrix {
        &self.r
    }
}

impl StochasticModel for TimeSeriesModel {
    fn sample_transition(
        &self,
        x: &Vector,
        _u: &Vector,
        t: u64,
        rng: &mut dyn RngCore,
    ) -> Result<Vector> {
        if self.params.noise_free {
            return Err(Error::InvalidParameter(
                "noise-free time series has no transition density".into(),
            ));
        }
        let v = gamma_sample(self.params.gamma_shape, self.params.gamma_scale, rng)?;
        Ok(Vector::from_element(
            1,
            self.process(Self::scalar(x)?, t, v),
        ))
    }

    fn transition_log_density(&self, next: &Vector, x: &Vector, _u: &Vector, t: u64) -> f64 {
        if next.len() != 1 || x.len() != 1 {
            return f64::NEG_INFINITY;
        }
        let v = next[0] - self.process(x[0], t, 0.0);
        self.noise_log_density(v)
    }
}
