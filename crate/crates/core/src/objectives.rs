//! Black-box objectives (all maximised).

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{derive_seed, Bounds};
use crate::error::{AboError, Result};

/// Something the optimizers can query. `eval_seed` drives any randomness
/// inside the evaluation.
pub trait Objective {
    fn evaluate(&mut self, x: &[f64], eval_seed: u64) -> Result<f64>;
}

impl<F: FnMut(&[f64]) -> f64> Objective for F {
    fn evaluate(&mut self, x: &[f64], _eval_seed: u64) -> Result<f64> {
        Ok(self(x))
    }
}

/// Integrand `f(w, x)` of a Monte Carlo objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerFunction {
    /// `-|w|^2`, whose expectation under `N(mu, diag s)` is `-(|mu|^2 + sum s)`.
    NegSquaredNorm,
}

impl InnerFunction {
    fn eval(self, w: &[f64], _x: &[f64]) -> f64 {
        match self {
            InnerFunction::NegSquaredNorm => -w.iter().map(|v| v * v).sum::<f64>(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveKind {
    /// `-|x - center|^2`.
    Quadratic { center: Vec<f64> },
    /// The Branin function, negated, on its usual domain `[-5, 10] x [0, 15]`.
    BraninNegated,
    /// `g(x) = E_{w ~ N(mu, diag s)} f(w, x)` for `x = [mu; s]` (`s` are
    /// variances), estimated with `n_mc` draws.
    McExpectation { inner: InnerFunction, n_mc: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    /// Standard deviation of additive Gaussian observation noise.
    pub noise_std: f64,
    pub seed: u64,
}

impl ObjectiveSpec {
    pub fn new(kind: ObjectiveKind, noise_std: f64, seed: u64) -> Result<Self> {
        let spec = Self { kind, noise_std, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(AboError::invalid("noise_std", format!("must be non-negative, got {}", self.noise_std)));
        }
        if let ObjectiveKind::McExpectation { n_mc: 0, .. } = self.kind {
            return Err(AboError::EmptySample);
        }
        Ok(())
    }

    /// Dimension the objective requires, if fixed.
    pub fn dim(&self) -> Option<usize> {
        match &self.kind {
            ObjectiveKind::Quadratic { center } => Some(center.len()),
            ObjectiveKind::BraninNegated => Some(2),
            ObjectiveKind::McExpectation { .. } => None,
        }
    }

    /// Deterministic in `(self, x, round_seed)`.
    pub fn evaluate(&self, x: &[f64], round_seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, 0x0B, round_seed));
        let clean = match &self.kind {
            ObjectiveKind::Quadratic { center } => {
                check_dim(center.len(), x)?;
                -x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>()
            }
            ObjectiveKind::BraninNegated => {
                check_dim(2, x)?;
                -branin(x[0], x[1])
            }
            ObjectiveKind::McExpectation { inner, n_mc } => {
                if *n_mc == 0 {
                    return Err(AboError::EmptySample);
                }
                if x.is_empty() || !x.len().is_multiple_of(2) {
                    return Err(AboError::invalid("point", "expected [mean; variances] with even length"));
                }
                let k = x.len() / 2;
                if let Some(i) = x[k..].iter().position(|s| !(*s > 0.0)) {
                    return Err(AboError::NonPositiveVariance {
                        index: k + i,
                        value: x[k + i],
                    });
                }
                let std: Vec<f64> = x[k..].iter().map(|s| s.sqrt()).collect();
                let mut w = vec![0.0; k];
                let mut total = 0.0;
                for _ in 0..*n_mc {
                    for ((wi, m), sd) in w.iter_mut().zip(&x[..k]).zip(&std) {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *wi = m + sd * z;
                    }
                    total += inner.eval(&w, x);
                }
                total / *n_mc as f64
            }
        };
        if self.noise_std > 0.0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            Ok(clean + self.noise_std * z)
        } else {
            Ok(clean)
        }
    }

    /// Known maximiser and maximum over `bounds` (noise-free).
    pub fn analytic_optimum(&self, bounds: &Bounds) -> Result<(Vec<f64>, f64)> {
        match &self.kind {
            ObjectiveKind::Quadratic { center } => {
                check_dim(center.len(), bounds.lower())?;
                let mut loc = center.clone();
                bounds.clip(&mut loc);
                let value = -loc.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>();
                Ok((loc, value))
            }
            ObjectiveKind::BraninNegated => Ok((vec![PI, 2.275], -5.0 / (4.0 * PI))),
            ObjectiveKind::McExpectation {
                inner: InnerFunction::NegSquaredNorm,
                ..
            } => {
                let d = bounds.dim();
                if !d.is_multiple_of(2) {
                    return Err(AboError::invalid("bounds", "expected [mean; variances] with even length"));
                }
                let k = d / 2;
                let mut loc = vec![0.0; d];
                loc[k..].copy_from_slice(&bounds.lower()[k..]);
                bounds.clip(&mut loc);
                if loc[k..].iter().any(|s| *s <= 0.0) {
                    return Err(AboError::invalid("bounds", "variance bounds must be positive"));
                }
                let value = -(loc[..k].iter().map(|m| m * m).sum::<f64>() + loc[k..].iter().sum::<f64>());
                Ok((loc, value))
            }
        }
    }
}

impl Objective for ObjectiveSpec {
    fn evaluate(&mut self, x: &[f64], eval_seed: u64) -> Result<f64> {
        ObjectiveSpec::evaluate(self, x, eval_seed)
    }
}

fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(AboError::DimensionMismatch { expected, got: x.len() })
    }
}

/// Standard Branin function (minimisation form).
pub fn branin(x1: f64, x2: f64) -> f64 {
    let a = 1.0;
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let r = 6.0;
    let s = 10.0;
    let t = 1.0 / (8.0 * PI);
    a * (x2 - b * x1 * x1 + c * x1 - r).powi(2) + s * (1.0 - t) * x1.cos() + s
}

/// The usual Branin domain.
pub fn branin_bounds() -> Bounds {
    Bounds::new(vec![-5.0, 0.0], vec![10.0, 15.0]).expect("static bounds")
}
