//! Box domains and seed derivation shared by the optimizers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AboError, Result};

/// An axis-aligned box `[lo_j, hi_j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(AboError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(AboError::invalid("bounds", "domain must have at least one dimension"));
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(AboError::invalid(
                    "bounds",
                    format!("dimension {j}: need finite lo < hi, got [{lo}, {hi}]"),
                ));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit cube `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        Self {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// Euclidean distance after rescaling every axis to unit width.
    pub fn normalized_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(self.lower.iter().zip(&self.upper))
            .map(|((x, y), (lo, hi))| {
                let d = (x - y) / (hi - lo);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Gradient with the components that push against an active bound removed.
    pub fn project_gradient(&self, x: &[f64], grad: &[f64]) -> Vec<f64> {
        grad.iter()
            .zip(x)
            .zip(self.lower.iter().zip(&self.upper))
            .map(|((g, v), (lo, hi))| {
                if (*v <= *lo && *g < 0.0) || (*v >= *hi && *g > 0.0) {
                    0.0
                } else {
                    *g
                }
            })
            .collect()
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect()
    }
}

/// Mixes a base seed with a stream tag and an index (splitmix64 finaliser).
///
/// Every random draw in the crate goes through a seed derived here, so runs
/// are pure functions of their configured seed.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(base) ^ stream) ^ index)
}
