//! Influence-vector surrogate.
//!
//! For a dataset `(x_i, y_i)` and similarity `S`, the influence vector of a
//! query `x` is the least-squares solution of
//!
//! ```text
//! I(x) = argmin_I | S_x - I (S + noise * Id) |^2
//! ```
//!
//! where `S_x = [S(x, x_i)]_i`. The predictive mean is `<I(x), y>` and the
//! predictive variance `|S(x, x) - <I(x), S_x>|`.
//!
//! The Gram matrix may be singular for a generic score. The solve is then
//! restricted to a row basis `B` of the Gram matrix, the reduced coefficients
//! `J(x) = S_x B^T (B B^T)^{-1}` are placed at the basis indices and every
//! other coefficient is exactly zero. When the Gram matrix has full rank the
//! solve is a plain linear solve against it.

mod basis;
pub mod gp;
mod projection;

use nalgebra::{DMatrix, DVector, LU};

pub use basis::{row_basis, BasisCache};
pub use gp::{gp_posterior, verify_geometric_view, GeometricViewReport, GpPosterior, GEOMETRIC_TOL};
pub use projection::{verify_empirical_projection, EmpiricalProjectionReport, PROJECTION_TOL};

use crate::error::{AboError, Result};
use crate::similarity::SimilaritySpec;

/// Default relative rank tolerance for the row-basis selection.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
enum Solver {
    /// Full rank: LU factorisations of the Gram matrix and its transpose.
    Full {
        direct: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
        transposed: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    },
    Reduced,
}

/// Dataset, Gram matrix and the cached factorisations needed by queries.
/// Immutable once built.
#[derive(Debug, Clone)]
pub struct SurrogateState {
    spec: SimilaritySpec,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    gram: DMatrix<f64>,
    basis: BasisCache,
    solver: Solver,
    /// `M y`, where `I(x) = S_x M`; `u1(x) = S_x . weights`.
    weights: Vec<f64>,
}

/// Influence coefficients of a query together with the least-squares
/// residual `|S_x - I (S + noise Id)|`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceResult {
    pub coefficients: Vec<f64>,
    pub basis_rows: Vec<usize>,
    pub residual: f64,
}

impl SurrogateState {
    pub fn build(spec: SimilaritySpec, points: Vec<Vec<f64>>, values: Vec<f64>, rank_tol: f64) -> Result<Self> {
        if points.len() != values.len() {
            return Err(AboError::LengthMismatch {
                points: points.len(),
                values: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(AboError::NonFiniteValue(i));
        }
        if !(rank_tol >= 0.0 && rank_tol.is_finite()) {
            return Err(AboError::invalid("rank_tol", format!("must be non-negative, got {rank_tol}")));
        }
        let n = points.len();
        let mut gram = spec.similarity_matrix(&points)?;
        for i in 0..n {
            gram[(i, i)] += spec.noise();
        }
        let basis = row_basis(&gram, rank_tol);
        let solver = if n > 0 && basis.rank() == n {
            let direct = gram.clone().lu();
            let transposed = gram.transpose().lu();
            if direct.is_invertible() && transposed.is_invertible() {
                Solver::Full { direct, transposed }
            } else {
                Solver::Reduced
            }
        } else {
            Solver::Reduced
        };
        let mut state = Self {
            spec,
            points,
            values,
            gram,
            basis,
            solver,
            weights: Vec::new(),
        };
        state.weights = state.apply_map(&state.values.clone());
        Ok(state)
    }

    pub fn spec(&self) -> &SimilaritySpec {
        &self.spec
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `S + noise * Id`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn basis(&self) -> &BasisCache {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    pub fn is_full_rank(&self) -> bool {
        matches!(self.solver, Solver::Full { .. })
    }

    fn check_query(&self, x: &[f64]) -> Result<()> {
        self.spec.validate_point(x)?;
        if let Some(p) = self.points.first() {
            if p.len() != x.len() {
                return Err(AboError::DimensionMismatch {
                    expected: p.len(),
                    got: x.len(),
                });
            }
        }
        Ok(())
    }

    /// Coefficients `I` minimising `|row - I G|` with the zero-fill rule.
    pub(crate) fn coefficients_for_row(&self, row: &[f64]) -> Vec<f64> {
        let n = self.len();
        match &self.solver {
            Solver::Full { transposed, .. } => transposed
                .solve(&DVector::from_column_slice(row))
                .expect("LU checked invertible at build")
                .iter()
                .copied()
                .collect(),
            Solver::Reduced => {
                let mut out = vec![0.0; n];
                let j = self.basis.reduced_coefficients(row);
                for (&i, c) in self.basis.basis_rows().iter().zip(j) {
                    out[i] = c;
                }
                out
            }
        }
    }

    /// `M v` where `I(x) = S_x M`.
    pub(crate) fn apply_map(&self, v: &[f64]) -> Vec<f64> {
        match &self.solver {
            Solver::Full { direct, .. } => direct
                .solve(&DVector::from_column_slice(v))
                .expect("LU checked invertible at build")
                .iter()
                .copied()
                .collect(),
            Solver::Reduced => {
                let restricted: Vec<f64> = self.basis.basis_rows().iter().map(|&i| v[i]).collect();
                self.basis.lift(&restricted)
            }
        }
    }

    pub(crate) fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn residual(&self, row: &[f64], coefficients: &[f64]) -> f64 {
        let n = self.len();
        let c = DVector::from_column_slice(coefficients);
        let fitted = self.gram.tr_mul(&c);
        (0..n).map(|j| (row[j] - fitted[j]).powi(2)).sum::<f64>().sqrt()
    }

    /// Influence of an arbitrary length-`n` row (e.g. an empirical feature).
    pub fn influence_of_row(&self, row: &[f64]) -> Result<InfluenceResult> {
        if row.len() != self.len() {
            return Err(AboError::DimensionMismatch {
                expected: self.len(),
                got: row.len(),
            });
        }
        let coefficients = self.coefficients_for_row(row);
        let residual = self.residual(row, &coefficients);
        Ok(InfluenceResult {
            coefficients,
            basis_rows: self.basis.basis_rows().to_vec(),
            residual,
        })
    }

    pub fn influence_vector(&self, x: &[f64]) -> Result<InfluenceResult> {
        self.check_query(x)?;
        let row = self.spec.similarity_row_unchecked(x, &self.points);
        self.influence_of_row(&row)
    }

    /// `sum_i I_i(x) y_i`.
    pub fn predictive_mean(&self, x: &[f64]) -> Result<f64> {
        self.check_query(x)?;
        let row = self.spec.similarity_row_unchecked(x, &self.points);
        let coefficients = self.coefficients_for_row(&row);
        Ok(dot(&coefficients, &self.values))
    }

    /// `|S(x, x) - sum_i I_i(x) S(x, x_i)|`.
    pub fn predictive_variance(&self, x: &[f64]) -> Result<f64> {
        self.check_query(x)?;
        Ok(self.signed_variance_unchecked(x).abs())
    }

    /// `S(x, x) - <I(x), S_x>` before the absolute value.
    pub(crate) fn signed_variance_unchecked(&self, x: &[f64]) -> f64 {
        let row = self.spec.similarity_row_unchecked(x, &self.points);
        let coefficients = self.coefficients_for_row(&row);
        self.spec.eval_self_unchecked() - dot(&coefficients, &row)
    }

    /// `Phi_e(x) = [S(x, x_i) + noise * [x == x_i]]_i`.
    pub fn empirical_feature(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_query(x)?;
        Ok(self
            .points
            .iter()
            .map(|p| {
                let s = self.spec.eval_unchecked(x, p);
                if p.as_slice() == x {
                    s + self.spec.noise()
                } else {
                    s
                }
            })
            .collect())
    }

    pub(crate) fn check(&self, x: &[f64]) -> Result<()> {
        self.check_query(x)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
