//! Ground truth for transformed Gaussian moments: Monte-Carlo estimates with
//! standard errors, closed forms for `sin` and polynomials, and
//! least-squares fits of the error order `p` in `err ∝ σᵖ`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{
    matrix_sqrt, spherical_simplex_points, symmetric_sigma_points, symmetrize,
    unscented_covariance, unscented_mean, GaussianBelief, Matrix, SigmaPointSet, UtParams, Vector,
};
use crate::models::numeric_jacobian;

pub const MIN_MC_SAMPLES: usize = 10_000;

/// The oracle is too noisy when its standard error exceeds this fraction
/// of the measured difference.
pub const INCONCLUSIVE_FRACTION: f64 = 0.1;

/// Errors at or below this level (relative to the oracle magnitude) count
/// as exact.
pub const EXACT_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub mean: Vector,
    pub cov: Matrix,
    pub n_samples: usize,
    /// Per-component standard error of the mean; zero for closed forms.
    pub standard_error: Vector,
}

impl MomentEstimate {
    /// A closed-form oracle with no sampling error.
    pub fn exact(mean: Vector, cov: Matrix) -> Self {
        let d = mean.len();
        Self {
            mean,
            cov,
            n_samples: 0,
            standard_error: Vector::zeros(d),
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Sample mean and covariance of `g(x)` for `x ~ belief`.
///
/// Sums are taken about the first transformed sample with compensated
/// summation.
pub fn mc_moments<G, R>(
    g: G,
    belief: &GaussianBelief,
    n_samples: usize,
    rng: &mut R,
) -> Result<MomentEstimate>
where
    G: Fn(&Vector) -> Result<Vector>,
    R: Rng + ?Sized,
{
    if n_samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_MC_SAMPLES} samples, got {n_samples}"
        )));
    }
    let l = matrix_sqrt(belief.cov())?;
    let mut shift: Option<Vector> = None;
    let mut first: Vec<CompensatedSum> = Vec::new();
    let mut second: Vec<CompensatedSum> = Vec::new();
    let mut dim = 0;
    for _ in 0..n_samples {
        let y = g(&belief.sample_with_sqrt(&l, rng))?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("transformed sample".into()));
        }
        let s = shift.get_or_insert_with(|| {
            dim = y.len();
            first = vec![CompensatedSum::default(); dim];
            second = vec![CompensatedSum::default(); dim * dim];
            y.clone()
        });
        if y.len() != dim {
            return Err(Error::Dimension {
                context: "transformed sample",
                expected: dim,
                got: y.len(),
            });
        }
        let d = &y - &*s;
        for i in 0..dim {
            first[i].add(d[i]);
            for j in 0..=i {
                second[i * dim + j].add(d[i] * d[j]);
            }
        }
    }
    let n = n_samples as f64;
    let shift = shift.expect("n_samples > 0");
    let s1 = Vector::from_iterator(dim, first.iter().map(|c| c.value()));
    let mut cov = Matrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..=i {
            let v = (second[i * dim + j].value() - s1[i] * s1[j] / n) / (n - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let mean = shift + s1 / n;
    let standard_error =
        Vector::from_iterator(dim, (0..dim).map(|i| (cov[(i, i)].max(0.0) / n).sqrt()));
    Ok(MomentEstimate {
        mean,
        cov,
        n_samples,
        standard_error,
    })
}

/// `E[sin x]` and `Var[sin x]` for `x ~ N(μ, σ²)`.
pub fn gaussian_sin_moments(mu: f64, var: f64) -> (f64, f64) {
    let mean = mu.sin() * (-var / 2.0).exp();
    let second = 0.5 * (1.0 - (2.0 * mu).cos() * (-2.0 * var).exp());
    (mean, second - mean * mean)
}

/// Raw moments `E[xᵏ]`, `k = 0..=order`, of `N(μ, σ²)`.
pub fn gaussian_raw_moments(mu: f64, var: f64, order: usize) -> Vec<f64> {
    let mut m = vec![1.0; order + 1];
    if order >= 1 {
        m[1] = mu;
    }
    for k in 2..=order {
        m[k] = mu * m[k - 1] + (k - 1) as f64 * var * m[k - 2];
    }
    m
}

/// `E[p(x)]` and `Var[p(x)]` for `x ~ N(μ, σ²)`, coefficients highest
/// degree first.
pub fn gaussian_polynomial_moments(coeffs: &[f64], mu: f64, var: f64) -> (f64, f64) {
    let deg = coeffs.len().saturating_sub(1);
    let moments = gaussian_raw_moments(mu, var, 2 * deg);
    let expect = |c: &[f64]| -> f64 {
        let d = c.len() - 1;
        c.iter().enumerate().map(|(i, a)| a * moments[d - i]).sum()
    };
    let mut square = vec![0.0; 2 * deg + 1];
    for (i, a) in coeffs.iter().enumerate() {
        for (j, b) in coeffs.iter().enumerate() {
            square[i + j] += a * b;
        }
    }
    let mean = expect(coeffs);
    (mean, expect(&square) - mean * mean)
}

/// How a method approximates the moments of `g(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformMethod {
    /// `g(x̄)`, `J P Jᵀ`.
    Linearized,
    /// Symmetric `2n + 1` sigma points.
    Unscented,
    /// Spherical-simplex `n + 2` points.
    SimplexUnscented,
    /// Symmetric points mapped by `g(χ₀) + J (χᵢ − χ₀)`.
    SinglePointUnscented,
}

/// Mean and covariance of `g(x)`, `x ~ belief`, as approximated by `method`.
pub fn transform_moments<G>(
    method: TransformMethod,
    g: G,
    belief: &GaussianBelief,
    params: &UtParams,
) -> Result<(Vector, Matrix)>
where
    G: Fn(&Vector) -> Result<Vector>,
{
    let through = |set: &SigmaPointSet, ys: Vec<Vector>| -> Result<(Vector, Matrix)> {
        let mean = unscented_mean(set, &ys)?;
        let cov = unscented_covariance(set, &ys, &mean)?;
        Ok((mean, cov))
    };
    match method {
        TransformMethod::Linearized => {
            let mean = g(belief.mean())?;
            let jac = numeric_jacobian(&g, belief.mean())?;
            Ok((mean, symmetrize(&jac * belief.cov() * jac.transpose())))
        }
        TransformMethod::Unscented => {
            let set = symmetric_sigma_points(belief, params)?;
            let ys = set.map(&g)?;
            through(&set, ys)
        }
        TransformMethod::SimplexUnscented => {
            let set = spherical_simplex_points(belief, params)?;
            let ys = set.map(&g)?;
            through(&set, ys)
        }
        TransformMethod::SinglePointUnscented => {
            let set = symmetric_sigma_points(belief, params)?;
            let c = set.center().clone();
            let g0 = g(&c)?;
            let jac = numeric_jacobian(&g, &c)?;
            let ys = set.points.iter().map(|p| &g0 + &jac * (p - &c)).collect();
            through(&set, ys)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformError {
    /// `‖method mean − oracle mean‖`.
    pub mean_err: f64,
    /// Frobenius norm of the covariance difference.
    pub cov_err: f64,
    /// Norm of the oracle's standard-error vector.
    pub oracle_standard_error: f64,
    /// The oracle's standard error exceeds 10% of `mean_err`.
    pub inconclusive: bool,
}

pub fn transform_error<G>(
    method: TransformMethod,
    g: G,
    belief: &GaussianBelief,
    params: &UtParams,
    oracle: &MomentEstimate,
) -> Result<TransformError>
where
    G: Fn(&Vector) -> Result<Vector>,
{
    let (mean, cov) = transform_moments(method, g, belief, params)?;
    crate::error::check_dim("oracle mean", oracle.mean.len(), mean.len())?;
    let mean_err = (&mean - &oracle.mean).norm();
    let cov_err = (&cov - &oracle.cov).norm();
    let se = oracle.standard_error.norm();
    Ok(TransformError {
        mean_err,
        cov_err,
        oracle_standard_error: se,
        inconclusive: se > INCONCLUSIVE_FRACTION * mean_err,
    })
}

/// Which moment's error is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Moment {
    Mean,
    Covariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OrderFit {
    /// Least-squares slope of `log err` against `log σ`.
    Slope {
        order: f64,
        errors: Vec<f64>,
        inconclusive: bool,
    },
    /// Every error is at round-off level.
    Exact,
}

impl OrderFit {
    pub fn order(&self) -> Option<f64> {
        match self {
            OrderFit::Slope { order, .. } => Some(*order),
            OrderFit::Exact => None,
        }
    }
}

/// Fits the error order of `method` over beliefs whose covariance is the
/// base covariance scaled by `s²` for each `s` in `scales`.
pub fn convergence_order<G, O>(
    method: TransformMethod,
    g: G,
    belief: &GaussianBelief,
    scales: &[f64],
    params: &UtParams,
    moment: Moment,
    oracle: O,
) -> Result<OrderFit>
where
    G: Fn(&Vector) -> Result<Vector>,
    O: Fn(&GaussianBelief) -> Result<MomentEstimate>,
{
    if scales.len() < 4 {
        return Err(Error::InvalidParameter("need at least four scales".into()));
    }
    if scales.windows(2).any(|w| !(w[1] < w[0])) || scales.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidParameter(
            "scales must be positive and strictly decreasing".into(),
        ));
    }
    let mut errors = Vec::with_capacity(scales.len());
    let mut exact = true;
    let mut inconclusive = false;
    for &s in scales {
        let scaled = belief.with_scaled_cov(s * s)?;
        let truth = oracle(&scaled)?;
        let e = transform_error(method, &g, &scaled, params, &truth)?;
        let (err, magnitude) = match moment {
            Moment::Mean => (e.mean_err, truth.mean.norm()),
            Moment::Covariance => (e.cov_err, truth.cov.norm()),
        };
        if err > EXACT_THRESHOLD * magnitude.max(1.0) {
            exact = false;
        }
        inconclusive |= e.inconclusive && moment == Moment::Mean;
        errors.push(err);
    }
    if exact {
        return Ok(OrderFit::Exact);
    }
    if errors.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Domain(
            "zero error at some scale but not all; order undefined".into(),
        ));
    }
    let xs: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(OrderFit::Slope {
        order: sxy / sxx,
        errors,
        inconclusive,
    })
}
