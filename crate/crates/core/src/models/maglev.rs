//! Hybrid permanent-magnet / electromagnet suspension with the load mass as
//! an augmented state.
//!
//! State: `x1` air gap (m), `x2` gap velocity (m/s), `x3` coil current (A),
//! `x4` suspended mass (kg). Input: coil voltage (V).
//!
//! ```text
//! ẋ1 = x2
//! ẋ2 = −μ0·A_ag·(N·x3 − H_c·L_PM)² / (m·D(x1)²) + g
//! ẋ3 = x2·x3/x1 − R_coil·x1·x3/K + x1·u/K
//! ṁ  = 0            (random walk via the mass entry of Q)
//!
//! D(x1) = 2·x1 + L_PM·A_ag/(μr·A_PM) + R_c·(h/R_L + μ0·A_ag) + h·L_PM/(μ0·μr·A_PM·R_L)
//! ```
//!
//! The discrete transition is one RK4 step of length `dt`; its Jacobian is
//! propagated exactly through the four stages.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gaussian::{gaussian_log_density, Matrix, Vector};
use crate::models::{rk4_step, sample_additive_gaussian, StochasticModel, SystemModel};

/// Physical constants (SI units).
///
/// The defaults are a placeholder set that levitates about 20 kg at a
/// 10 mm gap with a small coil current; they are not measured values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaglevConstants {
    /// Vacuum permeability (H/m).
    pub mu0: f64,
    /// Air-gap pole area (m²).
    pub a_ag: f64,
    /// Coil turns.
    pub n_turns: f64,
    /// Magnet coercivity (A/m); may be negative.
    pub h_c: f64,
    /// Magnet length (m).
    pub l_pm: f64,
    /// Magnet relative permeability.
    pub mu_r: f64,
    /// Magnet cross-section (m²).
    pub a_pm: f64,
    /// Core reluctance coefficient.
    pub r_c: f64,
    /// Geometric height (m).
    pub h_geom: f64,
    /// Leakage reluctance coefficient.
    pub r_l: f64,
    /// Coil resistance (Ω).
    pub r_coil: f64,
    /// Inductance coefficient, `L(x1) = K / x1` (H·m).
    pub k_coeff: f64,
    /// Gravitational acceleration (m/s²).
    pub g_gravity: f64,
}

impl Default for MaglevConstants {
    fn default() -> Self {
        Self {
            mu0: 4.0e-7 * std::f64::consts::PI,
            a_ag: 0.01,
            n_turns: 500.0,
            h_c: -7.0e5,
            l_pm: 0.005,
            mu_r: 1.05,
            a_pm: 0.01,
            r_c: 1.0,
            h_geom: 0.01,
            r_l: 1.0e6,
            r_coil: 2.0,
            k_coeff: 1.57e-3,
            g_gravity: 9.81,
        }
    }
}

impl MaglevConstants {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mu0", self.mu0),
            ("a_ag", self.a_ag),
            ("n_turns", self.n_turns),
            ("l_pm", self.l_pm),
            ("mu_r", self.mu_r),
            ("a_pm", self.a_pm),
            ("r_c", self.r_c),
            ("h_geom", self.h_geom),
            ("r_l", self.r_l),
            ("r_coil", self.r_coil),
            ("k_coeff", self.k_coeff),
            ("g_gravity", self.g_gravity),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "maglev constant {name} must be positive, got {value}"
                )));
            }
        }
        if !self.h_c.is_finite() {
            return Err(Error::InvalidParameter(
                "maglev constant h_c must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Gap-independent part of the magnetic-circuit denominator.
    fn reluctance_offset(&self) -> f64 {
        self.l_pm * self.a_ag / (self.mu_r * self.a_pm)
            + self.r_c * (self.h_geom / self.r_l + self.mu0 * self.a_ag)
            + self.h_geom * self.l_pm / (self.mu0 * self.mu_r * self.a_pm * self.r_l)
    }

    fn denominator(&self, gap: f64) -> f64 {
        2.0 * gap + self.reluctance_offset()
    }

    fn magnetomotive(&self, current: f64) -> f64 {
        self.n_turns * current - self.h_c * self.l_pm
    }

    /// Magnetic attraction (N) at the given gap and coil current.
    pub fn force(&self, gap: f64, current: f64) -> f64 {
        let mmf = self.magnetomotive(current);
        let d = self.denominator(gap);
        self.mu0 * self.a_ag * mmf * mmf / (d * d)
    }
}

#[derive(Debug, Clone)]
pub struct MaglevModel {
    constants: MaglevConstants,
    dt: f64,
    q: Matrix,
    r: Matrix,
}

impl MaglevModel {
    /// `q` is the 4×4 process-noise covariance per step, `gap_noise_var` the
    /// air-gap measurement variance.
    pub fn new(constants: MaglevConstants, dt: f64, q: Matrix, gap_noise_var: f64) -> Result<Self> {
        constants.validate()?;
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {dt}"
            )));
        }
        check_dim("maglev Q rows", 4, q.nrows())?;
        check_dim("maglev Q columns", 4, q.ncols())?;
        Ok(Self {
            constants,
            dt,
            q,
            r: Matrix::from_element(1, 1, gap_noise_var),
        })
    }

    pub fn constants(&self) -> &MaglevConstants {
        &self.constants
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn check_domain(&self, x: &Vector) -> Result<()> {
        check_dim("maglev state", 4, x.len())?;
        if !(x[0] > 0.0) {
            return Err(Error::Domain(format!(
                "air gap must be positive, got {}",
                x[0]
            )));
        }
        if !(x[3] > 0.0) {
            return Err(Error::Domain(format!(
                "mass must be positive, got {}",
                x[3]
            )));
        }
        Ok(())
    }

    fn control(u: &Vector) -> Result<f64> {
        check_dim("maglev control", 1, u.len())?;
        Ok(u[0])
    }

    /// Continuous-time right-hand side.
    pub fn derivative(&self, x: &Vector, u: f64) -> Result<Vector> {
        self.check_domain(x)?;
        let c = &self.constants;
        let (gap, vel, cur, mass) = (x[0], x[1], x[2], x[3]);
        let accel = -c.force(gap, cur) / mass + c.g_gravity;
        let dcur = vel * cur / gap - c.r_coil * gap * cur / c.k_coeff + gap * u / c.k_coeff;
        Ok(Vector::from_column_slice(&[vel, accel, dcur, 0.0]))
    }

    /// Jacobian of [`Self::derivative`] with respect to the state.
    pub fn derivative_jacobian(&self, x: &Vector, u: f64) -> Result<Matrix> {
        self.check_domain(x)?;
        let c = &self.constants;
        let (gap, vel, cur, mass) = (x[0], x[1], x[2], x[3]);
        let mmf = c.magnetomotive(cur);
        let d = c.denominator(gap);
        let k = c.mu0 * c.a_ag;
        let mut a = Matrix::zeros(4, 4);
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 4.0 * k * mmf * mmf / (mass * d * d * d);
        a[(1, 2)] = -2.0 * k * mmf * c.n_turns / (mass * d * d);
        a[(1, 3)] = k * mmf * mmf / (mass * mass * d * d);
        a[(2, 0)] = -vel * cur / (gap * gap) - c.r_coil * cur / c.k_coeff + u / c.k_coeff;
        a[(2, 1)] = cur / gap;
        a[(2, 2)] = vel / gap - c.r_coil * gap / c.k_coeff;
        Ok(a)
    }

    /// Coil current holding `mass` at `gap` in equilibrium.
    pub fn equilibrium_current(&self, mass: f64, gap: f64) -> f64 {
        let c = &self.constants;
        let mmf = c.denominator(gap) * (mass * c.g_gravity / (c.mu0 * c.a_ag)).sqrt();
        (mmf + c.h_c * c.l_pm) / c.n_turns
    }
}

impl SystemModel for MaglevModel {
    fn state_dim(&self) -> usize {
        4
    }

    fn measurement_dim(&self) -> usize {
        1
    }

    fn transition(&self, x: &Vector, u: &Vector, t: u64) -> Result<Vector> {
        let u = Self::control(u)?;
        rk4_step(
            |z, _, _| self.derivative(z, u),
            x,
            &Vector::zeros(0),
            t as f64 * self.dt,
            self.dt,
        )
    }

    fn measure(&self, x: &Vector, _t: u64) -> Result<Vector> {
        check_dim("maglev state", 4, x.len())?;
        Ok(Vector::from_element(1, x[0]))
    }

    fn transition_jacobian(&self, x: &Vector, u: &Vector, _t: u64) -> Result<Matrix> {
        let u = Self::control(u)?;
        let dt = self.dt;
        let half = 0.5 * dt;
        let eye = Matrix::identity(4, 4);
        let k1 = self.derivative(x, u)?;
        let j1 = self.derivative_jacobian(x, u)?;
        let x2 = x + &k1 * half;
        let k2 = self.derivative(&x2, u)?;
        let j2 = self.derivative_jacobian(&x2, u)? * (&eye + &j1 * half);
        let x3 = x + &k2 * half;
        let k3 = self.derivative(&x3, u)?;
        let j3 = self.derivative_jacobian(&x3, u)? * (&eye + &j2 * half);
        let x4 = x + &k3 * dt;
        let j4 = self.derivative_jacobian(&x4, u)? * (&eye + &j3 * dt);
        Ok(eye + (j1 + j2 * 2.0 + j3 * 2.0 + j4) * (dt / 6.0))
    }

    fn measurement_jacobian(&self, x: &Vector, _t: u64) -> Result<Matrix> {
        check_dim("maglev state", 4, x.len())?;
        Ok(Matrix::from_row_slice(1, 4, &[1.0, 0.0, 0.0, 0.0]))
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

/// PD gap regulator with an inner current loop, used only to drive the
/// simulated plant. It acts on the true state; filters see its output as a
/// known input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapController {
    /// Gap set-point (m).
    pub gap_ref: f64,
    /// Current demand per metre of gap error (A/m).
    pub kp: f64,
    /// Current demand per m/s of gap velocity (A·s/m).
    pub kd: f64,
    /// Current-loop bandwidth (1/s).
    pub current_gain: f64,
    /// Mass used for the feed-forward current (kg).
    pub nominal_mass: f64,
}

impl Default for GapController {
    fn default() -> Self {
        Self {
            gap_ref: 0.01,
            kp: 1000.0,
            kd: 30.0,
            current_gain: 300.0,
            nominal_mass: 20.0,
        }
    }
}

impl GapController {
    /// Coil voltage for the true state `x`.
    pub fn voltage(&self, model: &MaglevModel, x: &Vector) -> f64 {
        let c = model.constants();
        let (gap, vel, cur) = (x[0], x[1], x[2]);
        let demand = model.equilibrium_current(self.nominal_mass, self.gap_ref)
            + self.kp * (gap - self.gap_ref)
            + self.kd * vel;
        // makes ẋ3 = current_gain·(demand − x3)
        c.k_coeff / gap * (self.current_gain * (demand - cur) - vel * cur / gap) + c.r_coil * cur
    }
}

impl StochasticModel for MaglevModel {
    fn sample_transition(
        &self,
        x: &Vector,
        u: &Vector,
        t: u64,
        rng: &mut dyn RngCore,
    ) -> Result<Vector> {
        sample_additive_gaussian(self, x, u, t, rng)
    }

    fn transition_log_density(&self, next: &Vector, x: &Vector, u: &Vector, t: u64) -> f64 {
        match self.transition(x, u, t) {
            Ok(mean) => gaussian_log_density(&(next - mean), &self.q),
            Err(_) => f64::NEG_INFINITY,
        }
    }
}
