use crate::error::{Error, Result};
use crate::gaussian::{Matrix, Vector};
use crate::models::SystemModel;

/// Scalar system whose transition and measurement are the same polynomial.
/// Coefficients are stored highest degree first.
#[derive(Debug, Clone)]
pub struct PolynomialModel {
    coeffs: Vec<f64>,
    q: Matrix,
    r: Matrix,
}

/// Builds a scalar polynomial test system of degree 1 to 4.
///
/// `coeffs` are highest degree first, so `[a, b]` is `a·x + b` and
/// `[1, 0, 0]` is `x²`.
pub fn polynomial_test_model(coeffs: &[f64], q: f64, r: f64) -> Result<PolynomialModel> {
    let degree = coeffs.len().saturating_sub(1);
    if !(1..=4).contains(&degree) {
        return Err(Error::InvalidParameter(format!(
            "polynomial degree must be 1..=4, got {degree}"
        )));
    }
    Ok(PolynomialModel {
        coeffs: coeffs.to_vec(),
        q: Matrix::from_element(1, 1, q),
        r: Matrix::from_element(1, 1, r),
    })
}

impl PolynomialModel {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let d = self.degree();
        self.coeffs[..d]
            .iter()
            .enumerate()
            .fold(0.0, |acc, (i, c)| acc * x + c * (d - i) as f64)
    }

    fn scalar(x: &Vector) -> Result<f64> {
        if x.len() == 1 {
            Ok(x[0])
        } else {
            Err(Error::Dimension {
                context: "polynomial model state",
                expected: 1,
                got: x.len(),
            })
        }
    }
}

impl SystemModel for PolynomialModel {
    fn state_dim(&self) -> usize {
        1
    }

    fn measurement_dim(&self) -> usize {
        1
    }

    fn transition(&self, x: &Vector, _u: &Vector, _t: u64) -> Result<Vector> {
        Ok(Vector::from_element(1, self.eval(Self::scalar(x)?)))
    }

    fn measure(&self, x: &Vector, _t: u64) -> Result<Vector> {
        Ok(Vector::from_element(1, self.eval(Self::scalar(x)?)))
    }

    fn transition_jacobian(&self, x: &Vector, _u: &Vector, _t: u64) -> Result<Matrix> {
        Ok(Matrix::from_element(
            1,
            1,
            self.derivative(Self::scalar(x)?),
        ))
    }

    fn measurement_jacobian(&self, x: &Vector, _t: u64) -> Result<Matrix> {
        Ok(Matrix::from_element(
            1,
            1,
            self.derivative(Self::scalar(x)?),
        ))
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
