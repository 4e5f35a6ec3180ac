//! Similarity scores `S(x, x')`, their gradients and Gram assembly.
//!
//! Two scores are provided:
//!
//! * [`SimilarityKind::Rbf`], `exp(-|x - x'|^2 / (2 l^2))`. Because it is a
//!   positive-definite kernel, the influence surrogate built on it reproduces
//!   the GP posterior exactly, which makes it the reference path for
//!   verification.
//! * [`SimilarityKind::SymKlGaussian`], `const` minus the symmetrised KL
//!   divergence between diagonal Gaussians. A point is the concatenation
//!   `[mu_1..mu_k, s_1..s_k]` where the `s_i` are **variances**, not standard
//!   deviations.

use std::sync::atomic::{AtomicBool, Ordering};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{derive_seed, Bounds};
use crate::error::{AboError, Result};

/// Default floor for variance coordinates.
pub const DEFAULT_SIGMA_MIN: f64 = 1e-6;

static CLAMP_WARNED: AtomicBool = AtomicBool::new(false);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum SimilarityKind {
    Rbf {
        lengthscale: f64,
    },
    SymKlGaussian {
        constant: f64,
        /// Number of Gaussian components `k`; points have `2k` coordinates.
        half_dim: usize,
        sigma_min: f64,
    },
}

/// A similarity score together with the observation noise variance `sigma^2`
/// that is added to the Gram diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySpec {
    kind: SimilarityKind,
    noise: f64,
}

impl SimilaritySpec {
    pub fn rbf(lengthscale: f64, noise: f64) -> Result<Self> {
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(AboError::invalid("lengthscale", format!("must be positive, got {lengthscale}")));
        }
        check_noise(noise)?;
        Ok(Self {
            kind: SimilarityKind::Rbf { lengthscale },
            noise,
        })
    }

    pub fn sym_kl(constant: f64, half_dim: usize, sigma_min: f64, noise: f64) -> Result<Self> {
        if !(constant > 0.0 && constant.is_finite()) {
            return Err(AboError::invalid("const", format!("must be positive, got {constant}")));
        }
        if half_dim == 0 {
            return Err(AboError::invalid("half_dim", "need at least one Gaussian component"));
        }
        if !(sigma_min > 0.0 && sigma_min.is_finite()) {
            return Err(AboError::invalid("sigma_min", format!("must be positive, got {sigma_min}")));
        }
        check_noise(noise)?;
        Ok(Self {
            kind: SimilarityKind::SymKlGaussian {
                constant,
                half_dim,
                sigma_min,
            },
            noise,
        })
    }

    /// Symmetric-KL score whose constant is the largest value the quarter-trace
    /// terms reach on `bounds`, so the score is non-negative over the box and
    /// self-similarity is `const - k/2`.
    pub fn sym_kl_for_box(bounds: &Bounds, sigma_min: f64, noise: f64) -> Result<Self> {
        if !bounds.dim().is_multiple_of(2) {
            return Err(AboError::invalid(
                "bounds",
                format!("symmetric-KL points need an even dimension, got {}", bounds.dim()),
            ));
        }
        let half_dim = bounds.dim() / 2;
        Self::sym_kl(max_divergence_terms(bounds, sigma_min)?, half_dim, sigma_min, noise)
    }

    pub fn kind(&self) -> &SimilarityKind {
        &self.kind
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Point dimension required by this score, if fixed.
    pub fn point_dim(&self) -> Option<usize> {
        match self.kind {
            SimilarityKind::Rbf { .. } => None,
            SimilarityKind::SymKlGaussian { half_dim, .. } => Some(2 * half_dim),
        }
    }

    /// Checks that `x` is a valid point for this score.
    pub fn validate_point(&self, x: &[f64]) -> Result<()> {
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(AboError::NonFiniteValue(i));
        }
        if let SimilarityKind::SymKlGaussian { half_dim, .. } = self.kind {
            if x.len() != 2 * half_dim {
                return Err(AboError::DimensionMismatch {
                    expected: 2 * half_dim,
                    got: x.len(),
                });
            }
            if let Some((i, v)) = x[half_dim..].iter().enumerate().find(|(_, v)| **v <= 0.0) {
                return Err(AboError::NonPositiveVariance {
                    index: half_dim + i,
                    value: *v,
                });
            }
        }
        Ok(())
    }

    fn validate_pair(&self, x: &[f64], x2: &[f64]) -> Result<()> {
        if x.len() != x2.len() {
            return Err(AboError::DimensionMismatch {
                expected: x.len(),
                got: x2.len(),
            });
        }
        self.validate_point(x)?;
        self.validate_point(x2)
    }

    /// `S(x, x2)`.
    pub fn eval(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        self.validate_pair(x, x2)?;
        Ok(self.eval_unchecked(x, x2))
    }

    /// `S(x, x)`: 1 for RBF, `max(0, const - k/2)` for symmetric KL.
    pub fn eval_self(&self, x: &[f64]) -> Result<f64> {
        self.validate_point(x)?;
        Ok(self.eval_self_unchecked())
    }

    pub(crate) fn eval_self_unchecked(&self) -> f64 {
        match self.kind {
            SimilarityKind::Rbf { .. } => 1.0,
            SimilarityKind::SymKlGaussian {
                constant, half_dim, ..
            } => clamp_non_negative(constant - 0.5 * half_dim as f64),
        }
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], x2: &[f64]) -> f64 {
        match self.kind {
            SimilarityKind::Rbf { lengthscale } => {
                let sq: f64 = x.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq / (2.0 * lengthscale * lengthscale)).exp()
            }
            SimilarityKind::SymKlGaussian {
                constant,
                half_dim,
                sigma_min,
            } => clamp_non_negative(constant - sym_kl_terms(x, x2, half_dim, sigma_min)),
        }
    }

    /// `grad_x S(x, x2)` with respect to the first argument.
    pub fn grad_x(&self, x: &[f64], x2: &[f64]) -> Result<Vec<f64>> {
        self.validate_pair(x, x2)?;
        let mut out = vec![0.0; x.len()];
        self.grad_x_into(x, x2, &mut out);
        Ok(out)
    }

    pub(crate) fn grad_x_into(&self, x: &[f64], x2: &[f64], out: &mut [f64]) {
        match self.kind {
            SimilarityKind::Rbf { lengthscale } => {
                let s = self.eval_unchecked(x, x2);
                let scale = -s / (lengthscale * lengthscale);
                for ((g, a), b) in out.iter_mut().zip(x).zip(x2) {
                    *g = scale * (a - b);
                }
            }
            SimilarityKind::SymKlGaussian {
                constant,
                half_dim,
                sigma_min,
            } => {
                if constant - sym_kl_terms(x, x2, half_dim, sigma_min) < 0.0 {
                    out.iter_mut().for_each(|g| *g = 0.0);
                    return;
                }
                let k = half_dim;
                for i in 0..k {
                    let dm = x[i] - x2[i];
                    let s = x[k + i].max(sigma_min);
                    let s2 = x2[k + i].max(sigma_min);
                    out[i] = -0.5 * dm * (1.0 / s + 1.0 / s2);
                    out[k + i] = if x[k + i] < sigma_min {
                        0.0
                    } else {
                        -0.25 * (1.0 / s2 - s2 / (s * s)) + 0.25 * dm * dm / (s * s)
                    };
                }
            }
        }
    }

    /// Total derivative of `x -> S(x, x)`. Both scores have constant
    /// self-similarity, so this is the zero vector.
    pub fn grad_self(&self, x: &[f64]) -> Vec<f64> {
        vec![0.0; x.len()]
    }

    /// `n x n` matrix of pairwise scores.
    pub fn similarity_matrix(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        for p in points {
            if let Some(first) = points.first() {
                self.validate_pair(first, p)?;
            }
        }
        let n = points.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.eval_unchecked(&points[i], &points[i]);
            for j in (i + 1)..n {
                let v = self.eval_unchecked(&points[i], &points[j]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }

    /// Scores of `x` against every point.
    pub fn similarity_row(&self, x: &[f64], points: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.validate_point(x)?;
        points
            .iter()
            .map(|p| {
                self.validate_pair(x, p)?;
                Ok(self.eval_unchecked(x, p))
            })
            .collect()
    }

    pub(crate) fn similarity_row_unchecked(&self, x: &[f64], points: &[Vec<f64>]) -> Vec<f64> {
        points.iter().map(|p| self.eval_unchecked(x, p)).collect()
    }
}

fn check_noise(noise: f64) -> Result<()> {
    if noise >= 0.0 && noise.is_finite() {
        Ok(())
    } else {
        Err(AboError::invalid("noise", format!("must be non-negative, got {noise}")))
    }
}

fn clamp_non_negative(v: f64) -> f64 {
    if v < 0.0 {
        if !CLAMP_WARNED.swap(true, Ordering::Relaxed) {
            log::warn!("similarity score {v} clamped to 0; the constant is too small for this domain");
        }
        0.0
    } else {
        v
    }
}

/// `1/4 sum (s/s' + s'/s) + 1/4 sum (mu - mu')^2 (1/s + 1/s')`.
///
/// Written so that swapping the arguments performs the same floating-point
/// operations, which keeps the score bitwise symmetric.
fn sym_kl_terms(x: &[f64], x2: &[f64], k: usize, sigma_min: f64) -> f64 {
    (0..k)
        .map(|i| {
            let dm = x[i] - x2[i];
            let s = x[k + i].max(sigma_min);
            let s2 = x2[k + i].max(sigma_min);
            0.25 * ((s / s2 + s2 / s) + dm * dm * (1.0 / s + 1.0 / s2))
        })
        .sum()
}

/// Largest value of [`sym_kl_terms`] over a box. Each component is convex in
/// its variances and increasing in `|mu - mu'|`, so the maximum sits on a
/// corner pair and can be taken per component.
fn max_divergence_terms(bounds: &Bounds, sigma_min: f64) -> Result<f64> {
    let k = bounds.dim() / 2;
    let (lo, hi) = (bounds.lower(), bounds.upper());
    let mut total = 0.0;
    for i in 0..k {
        if hi[k + i] <= 0.0 {
            return Err(AboError::NonPositiveVariance {
                index: k + i,
                value: hi[k + i],
            });
        }
        let width = hi[i] - lo[i];
        let s_corners = [lo[k + i].max(sigma_min), hi[k + i].max(sigma_min)];
        let mut best = f64::MIN;
        for &s in &s_corners {
            for &s2 in &s_corners {
                let t = 0.25 * ((s / s2 + s2 / s) + width * width * (1.0 / s + 1.0 / s2));
                best = best.max(t);
            }
        }
        total += best;
    }
    Ok(total)
}

/// Parameters of a diagonal Gaussian `p(w | x)` plus the Monte Carlo sampler
/// settings used to draw from it.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianConditional {
    pub mean: Vec<f64>,
    pub variances: Vec<f64>,
    pub n_mc: usize,
    pub seed: u64,
}

impl GaussianConditional {
    /// Interprets `x = [mu; s]` as mean and variances.
    pub fn from_point(x: &[f64], n_mc: usize, seed: u64) -> Result<Self> {
        if !x.len().is_multiple_of(2) {
            return Err(AboError::invalid("point", "expected [mean; variances]"));
        }
        let k = x.len() / 2;
        Ok(Self {
            mean: x[..k].to_vec(),
            variances: x[k..].to_vec(),
            n_mc,
            seed,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.n_mc == 0 {
            return Err(AboError::EmptySample);
        }
        if self.mean.len() != self.variances.len() {
            return Err(AboError::DimensionMismatch {
                expected: self.mean.len(),
                got: self.variances.len(),
            });
        }
        if let Some((i, v)) = self.variances.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(AboError::NonPositiveVariance {
                index: self.mean.len() + i,
                value: *v,
            });
        }
        Ok(())
    }

    fn log_density_unnormalized(&self, w: &[f64]) -> f64 {
        -0.5 * w
            .iter()
            .zip(&self.mean)
            .zip(&self.variances)
            .map(|((w, m), s)| s.ln() + (w - m) * (w - m) / s)
            .sum::<f64>()
    }

    /// `grad_x log p(w | x)` for `x = [mu; s]`.
    fn score(&self, w: &[f64], out: &mut [f64]) {
        let k = self.mean.len();
        for i in 0..k {
            let r = w[i] - self.mean[i];
            let s = self.variances[i];
            out[i] = r / s;
            out[k + i] = -0.5 / s + 0.5 * r * r / (s * s);
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        for ((w, m), s) in out.iter_mut().zip(&self.mean).zip(&self.variances) {
            let z: f64 = StandardNormal.sample(rng);
            *w = m + s.sqrt() * z;
        }
    }
}

/// Monte Carlo gradient estimate with per-coordinate standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct McGradient {
    pub gradient: Vec<f64>,
    pub std_error: Vec<f64>,
}

/// Score-function estimate of `grad_x S(x, x')` for `S = const - KL(p||p')/2
/// - KL(p'||p)/2`:
///
/// `1/2 E_{p'}[grad log p] - 1/2 E_{p}[grad log p * log(e p / p')]`.
///
/// The first expectation uses `p_x2.n_mc` draws from `p(.|x')`, the second
/// `p_x.n_mc` draws from `p(.|x)`; the two use distinct seed streams so they
/// are independent even when both conditionals share a seed.
pub fn grad_sym_kl_mc(p_x: &GaussianConditional, p_x2: &GaussianConditional) -> Result<McGradient> {
    p_x.validate()?;
    p_x2.validate()?;
    if p_x.mean.len() != p_x2.mean.len() {
        return Err(AboError::DimensionMismatch {
            expected: p_x.mean.len(),
            got: p_x2.mean.len(),
        });
    }
    let k = p_x.mean.len();
    let dim = 2 * k;
    let mut w = vec![0.0; k];
    let mut score = vec![0.0; dim];

    let mut first = Moments::new(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(p_x2.seed, 0xA1, 0));
    for _ in 0..p_x2.n_mc {
        p_x2.sample(&mut rng, &mut w);
        p_x.score(&w, &mut score);
        first.push(&score);
    }

    let mut second = Moments::new(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(p_x.seed, 0xB2, 0));
    for _ in 0..p_x.n_mc {
        p_x.sample(&mut rng, &mut w);
        p_x.score(&w, &mut score);
        let weight = 1.0 + p_x.log_density_unnormalized(&w) - p_x2.log_density_unnormalized(&w);
        score.iter_mut().for_each(|g| *g *= weight);
        second.push(&score);
    }

    let gradient = first
        .mean
        .iter()
        .zip(&second.mean)
        .map(|(a, b)| 0.5 * (a - b))
        .collect();
    let va = first.variance_of_mean();
    let vb = second.variance_of_mean();
    let std_error = va.iter().zip(&vb).map(|(a, b)| 0.5 * (a + b).sqrt()).collect();
    Ok(McGradient { gradient, std_error })
}

/// Welford accumulator over vectors.
struct Moments {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn push(&mut self, v: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, m2), x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(v) {
            let delta = x - *m;
            *m += delta / n;
            *m2 += delta * (x - *m);
        }
    }

    fn variance_of_mean(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.mean.len()];
        }
        let n = self.count as f64;
        self.m2.iter().map(|m2| m2 / (n - 1.0) / n).collect()
    }
}
