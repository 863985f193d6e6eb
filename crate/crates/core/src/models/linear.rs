use rand::RngCore;

use crate::error::{check_dim, Result};
use crate::gaussian::{gaussian_log_density, Matrix, Vector};
use crate::models::{sample_additive_gaussian, StochasticModel, SystemModel};

/// Linear-Gaussian system `x' = A x + B u`, `y = C x`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub a: Matrix,
    pub b: Option<Matrix>,
    pub c: Matrix,
    pub q: Matrix,
    pub r: Matrix,
}

impl LinearModel {
    pub fn new(a: Matrix, c: Matrix, q: Matrix, r: Matrix) -> Result<Self> {
        let n = a.nrows();
        check_dim("linear model A columns", n, a.ncols())?;
        check_dim("linear model C columns", n, c.ncols())?;
        check_dim("linear model Q", n, q.nrows())?;
        check_dim("linear model R", c.nrows(), r.nrows())?;
        Ok(Self {
            a,
            b: None,
            c,
            q,
            r,
        })
    }

    pub fn with_control(mut self, b: Matrix) -> Result<Self> {
        check_dim("linear model B rows", self.a.nrows(), b.nrows())?;
        self.b = Some(b);
        Ok(self)
    }
}

impl SystemModel for LinearModel {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn measurement_dim(&self) -> usize {
        self.c.nrows()
    }

    fn transition(&self, x: &Vector, u: &Vector, _t: u64) -> Result<Vector> {
        check_dim("linear model state", self.a.ncols(), x.len())?;
        let mut next = &self.a * x;
        if let Some(b) = &self.b {
            check_dim("linear model control", b.ncols(), u.len())?;
            next += b * u;
        }
        Ok(next)
    }

    fn measure(&self, x: &Vector, _t: u64) -> Result<Vector> {
        check_dim("linear model state", self.c.ncols(), x.len())?;
        Ok(&self.c * x)
    }

    fn transition_jacobian(&self, _x: &Vector, _u: &Vector, _t: u64) -> Result<Matrix> {
        Ok(self.a.clone())
    }

    fn measurement_jacobian(&self, _x: &Vector, _t: u64) -> Result<Matrix> {
        Ok(self.c.clone())
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

impl StochasticModel for LinearModel {
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
