//! Gaussian beliefs, matrix square roots and sigma-point sets.
//!
//! Two point constructions are provided:
//!
//! - the symmetric `2n + 1` set `x̄, x̄ ± col_i(√((n+λ)P))` with
//!   `W_0 = λ/(n+λ)` and `W_i = 1/(2(n+λ))`;
//! - the spherical-simplex `n + 2` set, a center point with weight `W_0` and
//!   `n + 1` equally weighted points on a hypersphere of radius `∝ √n`.
//!
//! Mean and covariance weights coincide for both sets.

use std::cell::Cell;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Relative eigenvalue tolerance of the PSD invariant.
pub const PSD_TOLERANCE: f64 = 1e-9;

const JITTER_LADDER: [f64; 3] = [1e-12, 1e-10, 1e-8];

thread_local! {
    static SQRT_CALLS: Cell<u64> = const { Cell::new(0) };
}

/// Number of [`matrix_sqrt`] calls made on the current thread.
///
/// Used by the cost instrumentation to count factorizations per filter step.
pub fn sqrt_call_count() -> u64 {
    SQRT_CALLS.with(Cell::get)
}

/// Mean and covariance of a Gaussian state estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    mean: Vector,
    cov: Matrix,
}

impl GaussianBelief {
    /// Builds a belief, symmetrizing `cov` and checking it is PSD.
    pub fn new(mean: Vector, cov: Matrix) -> Result<Self> {
        check_dim("belief covariance rows", mean.len(), cov.nrows())?;
        check_dim("belief covariance columns", mean.len(), cov.ncols())?;
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("belief mean or covariance".into()));
        }
        let cov = symmetrize(cov);
        check_psd(&cov)?;
        Ok(Self { mean, cov })
    }

    /// Scalar belief `N(mean, var)`.
    pub fn scalar(mean: f64, var: f64) -> Result<Self> {
        Self::new(
            Vector::from_element(1, mean),
            Matrix::from_element(1, 1, var),
        )
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn into_parts(self) -> (Vector, Matrix) {
        (self.mean, self.cov)
    }

    /// Same mean, covariance multiplied by `factor`.
    pub fn with_scaled_cov(&self, factor: f64) -> Result<Self> {
        Self::new(self.mean.clone(), &self.cov * factor)
    }

    /// Draws one sample `mean + L z`, `z ~ N(0, I)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vector> {
        let l = matrix_sqrt(&self.cov)?;
        Ok(self.sample_with_sqrt(&l, rng))
    }

    pub(crate) fn sample_with_sqrt<R: Rng + ?Sized>(&self, l: &Matrix, rng: &mut R) -> Vector {
        let z = Vector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|_| rng.sample(StandardNormal)),
        );
        &self.mean + l * z
    }

    /// Log of the Gaussian density at `x`. Returns `-inf` for a singular
    /// covariance.
    pub fn log_density(&self, x: &Vector) -> f64 {
        gaussian_log_density(&(x - &self.mean), &self.cov)
    }
}

/// `log N(residual; 0, cov)` via a Cholesky solve.
pub fn gaussian_log_density(residual: &Vector, cov: &Matrix) -> f64 {
    let n = residual.len();
    if n == 1 {
        let var = cov[(0, 0)];
        if var <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let r = residual[0];
        return -0.5 * (r * r / var + var.ln() + std::f64::consts::TAU.ln());
    }
    let Some(chol) = cov.clone().cholesky() else {
        return f64::NEG_INFINITY;
    };
    let l = chol.l();
    let Some(z) = l.solve_lower_triangular(residual) else {
        return f64::NEG_INFINITY;
    };
    let log_det: f64 = l.diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    -0.5 * (z.norm_squared() + log_det + n as f64 * std::f64::consts::TAU.ln())
}

/// `(C + Cᵀ)/2`.
pub fn symmetrize(mut cov: Matrix) -> Matrix {
    let n = cov.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    cov
}

fn eigen_extremes(cov: &Matrix) -> (f64, f64) {
    match cov.nrows() {
        0 => (0.0, 0.0),
        1 => (cov[(0, 0)], cov[(0, 0)]),
        _ => {
            let eig = cov.clone().symmetric_eigenvalues();
            (eig.min(), eig.max())
        }
    }
}

/// Checks the PSD invariant: smallest eigenvalue ≥ −1e-9·|largest|.
pub fn check_psd(cov: &Matrix) -> Result<()> {
    let (min, max) = eigen_extremes(cov);
    if min >= -PSD_TOLERANCE * max.abs() {
        Ok(())
    } else {
        Err(Error::Indefinite {
            min_eigenvalue: min,
            max_eigenvalue: max,
        })
    }
}

pub fn is_psd(cov: &Matrix) -> bool {
    check_psd(cov).is_ok()
}

/// Nearest PSD matrix in Frobenius norm: negative eigenvalues clipped to zero.
pub fn project_psd(cov: &Matrix) -> Matrix {
    if cov.nrows() == 1 {
        return Matrix::from_element(1, 1, cov[(0, 0)].max(0.0));
    }
    let eig = cov.clone().symmetric_eigen();
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    symmetrize(&eig.eigenvectors * Matrix::from_diagonal(&clipped) * eig.eigenvectors.transpose())
}

/// Cholesky factor that tolerates exactly semi-definite input: a pivot within
/// round-off of zero yields a zero column. On failure returns the 1-based
/// index of the offending leading minor.
fn cholesky_semidefinite(a: &Matrix) -> std::result::Result<Matrix, usize> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let tol = 1e-14 * scale;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d > tol {
            let s = d.sqrt();
            l[(j, j)] = s;
            for i in (j + 1)..n {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / s;
            }
        } else if d >= -tol {
            // zero pivot: the rest of the column must vanish too
            for i in (j + 1)..n {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                if v.abs() > 1e-7 * scale {
                    return Err(j + 1);
                }
            }
        } else {
            return Err(j + 1);
        }
    }
    Ok(l)
}

/// Lower-triangular `L` with `L·Lᵀ = cov`.
///
/// If the factorization fails, retries with `cov + εI` for
/// `ε ∈ {1e-12, 1e-10, 1e-8}·trace(cov)/n` before giving up.
pub fn matrix_sqrt(cov: &Matrix) -> Result<Matrix> {
    SQRT_CALLS.with(|c| c.set(c.get() + 1));
    check_dim("matrix_sqrt", cov.nrows(), cov.ncols())?;
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix_sqrt input".into()));
    }
    let n = cov.nrows();
    if n == 1 {
        let v = cov[(0, 0)];
        return if v >= 0.0 {
            Ok(Matrix::from_element(1, 1, v.sqrt()))
        } else {
            Err(Error::NotPsd { minor: 1 })
        };
    }
    let first_failure = match cholesky_semidefinite(cov) {
        Ok(l) => return Ok(l),
        Err(minor) => minor,
    };
    let mean_diag = cov.trace() / n as f64;
    let base = if mean_diag > 0.0 { mean_diag } else { 1.0 };
    for eps in JITTER_LADDER {
        let mut jittered = cov.clone();
        for i in 0..n {
            jittered[(i, i)] += eps * base;
        }
        if let Ok(l) = cholesky_semidefinite(&jittered) {
            return Ok(l);
        }
    }
    Err(Error::NotPsd {
        minor: first_failure,
    })
}

/// Unscented-transform parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtParams {
    /// Spread parameter λ. `None` selects `3 − n`.
    pub lambda: Option<f64>,
    /// Center weight of the spherical-simplex set, in `[0, 1)`.
    pub w0_simplex: f64,
}

impl Default for UtParams {
    fn default() -> Self {
        Self {
            lambda: None,
            w0_simplex: 0.5,
        }
    }
}

impl UtParams {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda: Some(lambda),
            ..Self::default()
        }
    }

    pub fn lambda_for(&self, n: usize) -> f64 {
        self.lambda.unwrap_or(3.0 - n as f64)
    }
}

/// Weighted deterministic point set.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPointSet {
    pub points: Vec<Vector>,
    pub mean_weights: Vec<f64>,
    pub cov_weights: Vec<f64>,
}

impl SigmaPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The point the set is centered on (`χ_0`).
    pub fn center(&self) -> &Vector {
        &self.points[0]
    }

    /// Applies `g` to every point.
    pub fn map<F>(&self, mut g: F) -> Result<Vec<Vector>>
    where
        F: FnMut(&Vector) -> Result<Vector>,
    {
        self.points.iter().map(&mut g).collect()
    }
}

/// Symmetric `2n + 1` point set.
pub fn symmetric_sigma_points(belief: &GaussianBelief, params: &UtParams) -> Result<SigmaPointSet> {
    let n = belief.dim();
    let lambda = params.lambda_for(n);
    let spread = n as f64 + lambda;
    if spread <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "n + lambda must be positive (n = {n}, lambda = {lambda})"
        )));
    }
    let root = matrix_sqrt(belief.cov())? * spread.sqrt();
    let mean = belief.mean();
    let mut points = Vec::with_capacity(2 * n + 1);
    points.push(mean.clone());
    for i in 0..n {
        points.push(mean + root.column(i));
    }
    for i in 0..n {
        points.push(mean - root.column(i));
    }
    let mut weights = vec![0.5 / spread; 2 * n + 1];
    weights[0] = lambda / spread;
    Ok(SigmaPointSet {
        points,
        cov_weights: weights.clone(),
        mean_weights: weights,
    })
}

/// Unit spherical-simplex points (columns of an `n × (n+2)` matrix, column 0
/// is the origin) for center weight `w0`.
fn unit_simplex(n: usize, w0: f64) -> Matrix {
    let w1 = (1.0 - w0) / (n as f64 + 1.0);
    let mut z = Matrix::zeros(n, n + 2);
    let r = 1.0 / (2.0 * w1).sqrt();
    z[(0, 1)] = -r;
    z[(0, 2)] = r;
    for j in 2..=n {
        let jf = j as f64;
        let denom = (jf * (jf + 1.0) * w1).sqrt();
        for i in 1..=j {
            z[(j - 1, i)] = -1.0 / denom;
        }
        z[(j - 1, j + 1)] = jf / denom;
    }
    z
}

/// Spherical-simplex `n + 2` point set.
pub fn spherical_simplex_points(
    belief: &GaussianBelief,
    params: &UtParams,
) -> Result<SigmaPointSet> {
    let w0 = params.w0_simplex;
    if !(0.0..1.0).contains(&w0) {
        return Err(Error::InvalidParameter(format!(
            "simplex center weight must lie in [0, 1), got {w0}"
        )));
    }
    let n = belief.dim();
    let l = matrix_sqrt(belief.cov())?;
    let offsets = &l * unit_simplex(n, w0);
    let points = offsets
        .column_iter()
        .map(|c| belief.mean() + c)
        .collect::<Vec<_>>();
    let mut weights = vec![(1.0 - w0) / (n as f64 + 1.0); n + 2];
    weights[0] = w0;
    Ok(SigmaPointSet {
        points,
        cov_weights: weights.clone(),
        mean_weights: weights,
    })
}

fn check_cardinality(set: &SigmaPointSet, transformed: &[Vector]) -> Result<()> {
    check_dim("transformed sigma points", set.len(), transformed.len())?;
    if let Some(first) = transformed.first() {
        for y in transformed {
            check_dim("transformed point dimension", first.len(), y.len())?;
        }
    }
    Ok(())
}

/// `Σ W_i^m y_i`.
pub fn unscented_mean(set: &SigmaPointSet, transformed: &[Vector]) -> Result<Vector> {
    check_cardinality(set, transformed)?;
    let dim = transformed.first().map_or(0, |y| y.len());
    let mut mean = Vector::zeros(dim);
    for (w, y) in set.mean_weights.iter().zip(transformed) {
        mean.axpy(*w, y, 1.0);
    }
    Ok(mean)
}

/// `Σ W_i^c (y_i − ȳ)(y_i − ȳ)ᵀ`, symmetrized.
pub fn unscented_covariance(
    set: &SigmaPointSet,
    transformed: &[Vector],
    transformed_mean: &Vector,
) -> Result<Matrix> {
    check_cardinality(set, transformed)?;
    let dim = transformed_mean.len();
    let mut cov = Matrix::zeros(dim, dim);
    for (w, y) in set.cov_weights.iter().zip(transformed) {
        check_dim("transformed mean", dim, y.len())?;
        let d = y - transformed_mean;
        cov.ger(*w, &d, &d, 1.0);
    }
    Ok(symmetrize(cov))
}

/// `Σ W_i^c (x_i − x̄)(y_i − ȳ)ᵀ`, where `x_i` are the set's own points.
pub fn unscented_cross_covariance(
    set: &SigmaPointSet,
    point_mean: &Vector,
    transformed: &[Vector],
    transformed_mean: &Vector,
) -> Result<Matrix> {
    check_cardinality(set, transformed)?;
    let mut cross = Matrix::zeros(point_mean.len(), transformed_mean.len());
    for ((w, x), y) in set.cov_weights.iter().zip(&set.points).zip(transformed) {
        let dx = x - point_mean;
        let dy = y - transformed_mean;
        cross.ger(*w, &dx, &dy, 1.0);
    }
    Ok(cross)
}
