//! Exact GP posterior and the projection identities it satisfies.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::dot;
use crate::error::{AboError, Result};
use crate::similarity::SimilaritySpec;

/// Absolute tolerance of the geometric-view checks.
pub const GEOMETRIC_TOL: f64 = 1e-8;

/// GP posterior with a cached Cholesky factor of `K + noise * Id`.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    spec: SimilaritySpec,
    points: Vec<Vec<f64>>,
    chol: Option<Cholesky<f64, Dyn>>,
    alpha: Vec<f64>,
}

impl GpPosterior {
    pub fn fit(spec: &SimilaritySpec, points: &[Vec<f64>], values: &[f64]) -> Result<Self> {
        if points.len() != values.len() {
            return Err(AboError::LengthMismatch {
                points: points.len(),
                values: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(AboError::NonFiniteValue(i));
        }
        let n = points.len();
        let mut k = spec.similarity_matrix(points)?;
        for i in 0..n {
            k[(i, i)] += spec.noise();
        }
        let (chol, alpha) = if n == 0 {
            (None, Vec::new())
        } else {
            let chol = Cholesky::new(k).ok_or(AboError::SingularMatrix("noisy kernel matrix"))?;
            let alpha = chol.solve(&DVector::from_column_slice(values)).iter().copied().collect();
            (Some(chol), alpha)
        };
        Ok(Self {
            spec: spec.clone(),
            points: points.to_vec(),
            chol,
            alpha,
        })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        self.spec.validate_point(x)?;
        match self.points.first() {
            Some(p) if p.len() != x.len() => Err(AboError::DimensionMismatch {
                expected: p.len(),
                got: x.len(),
            }),
            _ => Ok(()),
        }
    }

    /// `K_sigma^{-1} k_x`, the projection coefficients in closed form.
    pub fn coefficients(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(self.coefficients_unchecked(&self.spec.similarity_row_unchecked(x, &self.points)))
    }

    fn coefficients_unchecked(&self, kx: &[f64]) -> Vec<f64> {
        match &self.chol {
            Some(c) => c.solve(&DVector::from_column_slice(kx)).iter().copied().collect(),
            None => Vec::new(),
        }
    }

    /// Posterior mean and `K(x,x) - k_x K_sigma^{-1} k_x^T` before the absolute value.
    fn mean_and_signed_variance(&self, x: &[f64]) -> (f64, f64, Vec<f64>, Vec<f64>) {
        let kx = self.spec.similarity_row_unchecked(x, &self.points);
        let p = self.coefficients_unchecked(&kx);
        let mean = dot(&kx, &self.alpha);
        let var = self.spec.eval_self_unchecked() - dot(&kx, &p);
        (mean, var, kx, p)
    }

    /// `(mean, variance)`.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.check(x)?;
        let (m, v, _, _) = self.mean_and_signed_variance(x);
        Ok((m, v.abs()))
    }

    /// `mean + kappa * sqrt(variance)` and its gradient. The variance in the
    /// gradient denominator is floored at `variance_floor`.
    pub fn ucb_with_gradient(&self, x: &[f64], kappa: f64, variance_floor: f64) -> Result<(f64, Vec<f64>)> {
        self.check(x)?;
        let (mean, var, _, p) = self.mean_and_signed_variance(x);
        let d = x.len();
        let mut grad_mean = vec![0.0; d];
        let mut grad_var = self.spec.grad_self(x);
        let mut g = vec![0.0; d];
        for (i, xi) in self.points.iter().enumerate() {
            self.spec.grad_x_into(x, xi, &mut g);
            for j in 0..d {
                grad_mean[j] += g[j] * self.alpha[i];
                grad_var[j] -= 2.0 * g[j] * p[i];
            }
        }
        let value = mean + kappa * var.abs().sqrt();
        let denom = 2.0 * var.abs().max(variance_floor).sqrt();
        let sign = if var < 0.0 { -1.0 } else { 1.0 };
        let grad = grad_mean
            .iter()
            .zip(&grad_var)
            .map(|(gm, gv)| gm + kappa * sign * gv / denom)
            .collect();
        Ok((value, grad))
    }
}

/// GP posterior `(mean, variance)` at `x`; the noise variance comes from `spec`.
pub fn gp_posterior(spec: &SimilaritySpec, points: &[Vec<f64>], values: &[f64], x: &[f64]) -> Result<(f64, f64)> {
    GpPosterior::fit(spec, points, values)?.predict(x)
}

/// Outcome of checking the projection view of the GP posterior at one query.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricViewReport {
    /// `K_sigma^{-1} k_x`.
    pub closed_form: Vec<f64>,
    /// Minimiser of the projection objective, found iteratively.
    pub projection: Vec<f64>,
    /// Squared distance from the feature of `x` to the span of the data
    /// features.
    pub residual_sq: f64,
    pub variance: f64,
    pub noise: f64,
    pub mean: f64,
    pub projected_mean: f64,
}

impl GeometricViewReport {
    pub fn coefficient_error(&self) -> f64 {
        self.closed_form
            .iter()
            .zip(&self.projection)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `| |R|^2 - noise - V |`.
    pub fn identity_error(&self) -> f64 {
        (self.residual_sq - self.noise - self.variance).abs()
    }

    pub fn mean_error(&self) -> f64 {
        (self.mean - self.projected_mean).abs()
    }

    pub fn passed(&self) -> bool {
        self.coefficient_error() <= GEOMETRIC_TOL
            && self.identity_error() <= GEOMETRIC_TOL
            && self.mean_error() <= GEOMETRIC_TOL
    }
}

/// Checks the projection view of the GP posterior using Gram arithmetic only.
///
/// With `K~ = K + noise * delta` the feature of `x` (treated as a fresh
/// index, distinct from every data point) is projected onto the span of the
/// data features by minimising
///
/// ```text
/// J(d) = K~(x,x) - 2 k_x d + d^T K_sigma d
/// ```
///
/// with conjugate gradients. The minimiser must equal `K_sigma^{-1} k_x`, the
/// minimum `|R|^2` must equal `V + noise`, and `<d, y>` must equal the
/// posterior mean.
pub fn verify_geometric_view(
    spec: &SimilaritySpec,
    points: &[Vec<f64>],
    values: &[f64],
    x: &[f64],
) -> Result<GeometricViewReport> {
    let gp = GpPosterior::fit(spec, points, values)?;
    gp.check(x)?;
    let (mean, signed_var, kx, closed_form) = gp.mean_and_signed_variance(x);

    let n = points.len();
    let mut k_sigma = spec.similarity_matrix(points)?;
    for i in 0..n {
        k_sigma[(i, i)] += spec.noise();
    }
    let b = DVector::from_column_slice(&kx);
    let d = conjugate_gradient(&k_sigma, &b);
    let k_tilde_xx = spec.eval_self_unchecked() + spec.noise();
    let residual_sq = k_tilde_xx - 2.0 * b.dot(&d) + d.dot(&(&k_sigma * &d));
    let projection: Vec<f64> = d.iter().copied().collect();
    let projected_mean = dot(&projection, values);
    Ok(GeometricViewReport {
        closed_form,
        projection,
        residual_sq,
        variance: signed_var.abs(),
        noise: spec.noise(),
        mean,
        projected_mean,
    })
}

/// Minimises `d^T A d / 2 - b^T d` for symmetric positive-definite `A`.
/// Restarts from the true residual after every `n` steps.
fn conjugate_gradient(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = b.len();
    let mut x = DVector::zeros(n);
    if n == 0 {
        return x;
    }
    let target = 1e-15 * b.norm().max(f64::MIN_POSITIVE);
    for _cycle in 0..50 {
        let mut r = b - a * &x;
        if r.norm() <= target {
            break;
        }
        let mut p = r.clone();
        let mut rs = r.dot(&r);
        for _ in 0..n {
            let ap = a * &p;
            let pap = p.dot(&ap);
            if pap <= 0.0 {
                break;
            }
            let step = rs / pap;
            x.axpy(step, &p, 1.0);
            r.axpy(-step, &ap, 1.0);
            let rs_next = r.dot(&r);
            if rs_next.sqrt() <= target {
                break;
            }
            p = &r + (rs_next / rs) * &p;
            rs = rs_next;
        }
    }
    x
}
