//! Kalman-type filters behind one predict/update interface.
//!
//! | filter | predicted mean | predicted covariance | measurement update |
//! |--------|----------------|----------------------|--------------------|
//! | EKF    | `f(x̂)`         | `F P Fᵀ + Q`         | linearized, Joseph |
//! | UKF    | UT, `2n+1` pts | UT                   | UT (points redrawn from the prior) |
//! | NewKF  | UT, `2n+1` pts | `F P Fᵀ + Q`         | `ŷ` from `h(f(χ))`, linearized gain, Joseph |
//! | SPUKF  | UT over `f(χ₀) + F(χᵢ − χ₀)` | UT     | UT |
//! | SSUKF  | UT, `n+2` simplex pts | UT            | UT (simplex) |
//!
//! All filters are values: a step consumes a [`FilterState`] and returns the
//! next one.

mod ekf;
mod newkf;
mod spukf;
mod unscented;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gaussian::{
    check_psd, is_psd, project_psd, symmetrize, GaussianBelief, Matrix, UtParams, Vector,
};
use crate::models::{numeric_jacobian, SystemModel};

pub use ekf::{ekf_predict, ekf_step};
pub use newkf::{newkf_predict, newkf_step, HybridPrediction};
pub use spukf::{spukf_predict, spukf_step};
pub use unscented::{ssukf_predict, ssukf_step, ukf_predict, ukf_step};

/// Condition number above which the innovation covariance is rejected.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FilterKind {
    #[serde(rename = "EKF")]
    Ekf,
    #[serde(rename = "SSUKF")]
    Ssukf,
    #[serde(rename = "SPUKF")]
    Spukf,
    #[serde(rename = "UKF")]
    Ukf,
    #[serde(rename = "NewKF")]
    NewKf,
}

impl FilterKind {
    pub const ALL: [FilterKind; 5] = [
        FilterKind::Ekf,
        FilterKind::Ssukf,
        FilterKind::Spukf,
        FilterKind::Ukf,
        FilterKind::NewKf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Ekf => "EKF",
            FilterKind::Ssukf => "SSUKF",
            FilterKind::Spukf => "SPUKF",
            FilterKind::Ukf => "UKF",
            FilterKind::NewKf => "NewKF",
        }
    }

    /// One predict/update cycle of this filter.
    pub fn step<M: SystemModel + ?Sized>(
        self,
        state: &FilterState,
        model: &M,
        u: &Vector,
        y: &Vector,
        opts: &FilterOptions,
    ) -> Result<FilterState> {
        match self {
            FilterKind::Ekf => ekf_step(state, model, u, y, opts),
            FilterKind::Ukf => ukf_step(state, model, u, y, opts),
            FilterKind::NewKf => newkf_step(state, model, u, y, opts),
            FilterKind::Spukf => spukf_step(state, model, u, y, opts),
            FilterKind::Ssukf => ssukf_step(state, model, u, y, opts),
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .collect();
        match key.to_ascii_lowercase().as_str() {
            "ekf" => Ok(FilterKind::Ekf),
            "ukf" => Ok(FilterKind::Ukf),
            "newkf" | "hukf" => Ok(FilterKind::NewKf),
            "spukf" => Ok(FilterKind::Spukf),
            "ssukf" => Ok(FilterKind::Ssukf),
            _ => Err(Error::InvalidParameter(format!(
                "unknown filter kind {s:?}"
            ))),
        }
    }
}

/// Where Jacobians come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    /// The model's own Jacobian methods (closed-form when it provides them).
    #[default]
    Model,
    /// Always central differences.
    Numeric,
}

/// Covariance form of the linearized measurement update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceUpdate {
    /// `(I − KH) P (I − KH)ᵀ + K R Kᵀ`.
    #[default]
    Joseph,
    /// `(I − KH) P`.
    Simple,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FilterOptions {
    pub ut: UtParams,
    pub covariance_update: CovarianceUpdate,
    pub jacobians: JacobianMode,
}

/// Posterior `(x̂_k, P_k)` at step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub belief: GaussianBelief,
    pub step: u64,
}

impl FilterState {
    pub fn new(belief: GaussianBelief, step: u64) -> Self {
        Self { belief, step }
    }

    pub fn mean(&self) -> &Vector {
        self.belief.mean()
    }

    pub fn cov(&self) -> &Matrix {
        self.belief.cov()
    }
}

/// Predicted measurement `ŷ⁻`, innovation covariance `S` and the state/
/// measurement cross term (`P_xy`, or `P⁻Hᵀ` for linearized updates).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedMeasurement {
    pub mean: Vector,
    pub innovation_cov: Matrix,
    pub cross_cov: Matrix,
}

pub(crate) fn transition_jacobian<M: SystemModel + ?Sized>(
    model: &M,
    x: &Vector,
    u: &Vector,
    t: u64,
    opts: &FilterOptions,
) -> Result<Matrix> {
    match opts.jacobians {
        JacobianMode::Model => model.transition_jacobian(x, u, t),
        JacobianMode::Numeric => numeric_jacobian(|z| model.transition(z, u, t), x),
    }
}

pub(crate) fn measurement_jacobian<M: SystemModel + ?Sized>(
    model: &M,
    x: &Vector,
    t: u64,
    opts: &FilterOptions,
) -> Result<Matrix> {
    match opts.jacobians {
        JacobianMode::Model => model.measurement_jacobian(x, t),
        JacobianMode::Numeric => numeric_jacobian(|z| model.measure(z, t), x),
    }
}

/// `F P Fᵀ + Q`, symmetrized. Shared by EKF and NewKF so both produce the
/// same bits from the same posterior.
pub fn linearized_covariance(jac: &Matrix, cov: &Matrix, noise: &Matrix) -> Matrix {
    symmetrize(jac * cov * jac.transpose() + noise)
}

/// Builds a belief, projecting the covariance onto the PSD cone if round-off
/// pushed it outside.
pub(crate) fn psd_belief(mean: Vector, cov: Matrix) -> Result<GaussianBelief> {
    let cov = symmetrize(cov);
    if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("filter mean or covariance".into()));
    }
    let cov = if is_psd(&cov) { cov } else { project_psd(&cov) };
    GaussianBelief::new(mean, cov)
}

pub(crate) fn check_inputs<M: SystemModel + ?Sized>(
    state: &FilterState,
    model: &M,
    y: &Vector,
) -> Result<()> {
    check_dim("filter state", model.state_dim(), state.belief.dim())?;
    check_dim("measurement", model.measurement_dim(), y.len())
}

/// `K = C S⁻¹` via a Cholesky solve of `S`.
pub(crate) fn kalman_gain(cross: &Matrix, innovation_cov: &Matrix) -> Result<Matrix> {
    let m = innovation_cov.nrows();
    let (min, max) = if m == 1 {
        (innovation_cov[(0, 0)], innovation_cov[(0, 0)])
    } else {
        let eig = innovation_cov.clone().symmetric_eigenvalues();
        (eig.min(), eig.max())
    };
    if !(min > 0.0) || !min.is_finite() || !max.is_finite() {
        return Err(Error::SingularInnovation {
            condition: f64::INFINITY,
        });
    }
    let condition = max / min;
    if condition > MAX_INNOVATION_CONDITION {
        return Err(Error::SingularInnovation { condition });
    }
    if m == 1 {
        return Ok(cross / innovation_cov[(0, 0)]);
    }
    let chol = innovation_cov
        .clone()
        .cholesky()
        .ok_or(Error::SingularInnovation { condition })?;
    Ok(chol.solve(&cross.transpose()).transpose())
}

/// Linearized update with measurement Jacobian `h_jac`.
pub(crate) fn linearized_update(
    prior: &GaussianBelief,
    predicted: &PredictedMeasurement,
    h_jac: &Matrix,
    r: &Matrix,
    y: &Vector,
    opts: &FilterOptions,
) -> Result<GaussianBelief> {
    let gain = kalman_gain(&predicted.cross_cov, &predicted.innovation_cov)?;
    let mean = prior.mean() + &gain * (y - &predicted.mean);
    let n = prior.dim();
    let i_kh = Matrix::identity(n, n) - &gain * h_jac;
    let cov = match opts.covariance_update {
        CovarianceUpdate::Joseph => {
            &i_kh * prior.cov() * i_kh.transpose() + &gain * r * gain.transpose()
        }
        CovarianceUpdate::Simple => &i_kh * prior.cov(),
    };
    psd_belief(mean, cov)
}

/// Linearized measurement prediction around `ŷ`: `S = H P Hᵀ + R`,
/// cross term `P Hᵀ`.
pub(crate) fn linearized_measurement(
    prior: &GaussianBelief,
    predicted_mean: Vector,
    h_jac: &Matrix,
    r: &Matrix,
) -> PredictedMeasurement {
    let cross_cov = prior.cov() * h_jac.transpose();
    let innovation_cov = symmetrize(h_jac * &cross_cov + r);
    PredictedMeasurement {
        mean: predicted_mean,
        innovation_cov,
        cross_cov,
    }
}

/// Statistical-linearization update: `x̂ = x̂⁻ + K ν`, `P = P⁻ − K S Kᵀ`.
pub(crate) fn unscented_update(
    prior: &GaussianBelief,
    predicted: &PredictedMeasurement,
    y: &Vector,
) -> Result<GaussianBelief> {
    let gain = kalman_gain(&predicted.cross_cov, &predicted.innovation_cov)?;
    let mean = prior.mean() + &gain * (y - &predicted.mean);
    let cov = prior.cov() - &gain * &predicted.innovation_cov * gain.transpose();
    psd_belief(mean, cov)
}

/// Asserts a posterior satisfies the PSD invariant.
pub fn check_posterior(state: &FilterState) -> Result<()> {
    check_psd(state.cov())
}
