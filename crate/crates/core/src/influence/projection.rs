use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::SurrogateState;
use crate::error::{AboError, Result};

/// Absolute tolerance for residual and coefficient agreement.
pub const PROJECTION_TOL: f64 = 1e-8;

/// Comparison between the influence solve and a pseudo-inverse projection of
/// the empirical feature onto the span of the data features.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalProjectionReport {
    /// Whether the empirical feature of `x` equals its similarity row (true
    /// whenever `x` is not a data point).
    pub feature_is_similarity_row: bool,
    pub influence_residual: f64,
    pub oracle_residual: f64,
    /// Largest coefficient gap; only meaningful in the full-rank case, where
    /// the least-squares solution is unique.
    pub coefficient_error: Option<f64>,
    /// Largest coefficient outside the basis rows (must be exactly zero).
    pub off_basis_max: f64,
}

impl EmpiricalProjectionReport {
    pub fn residual_error(&self) -> f64 {
        (self.influence_residual - self.oracle_residual).abs()
    }

    pub fn passed(&self) -> bool {
        self.residual_error() <= PROJECTION_TOL
            && self.coefficient_error.is_none_or(|e| e <= PROJECTION_TOL)
            && self.off_basis_max == 0.0
    }
}

/// Projects `Phi_e(x)` onto the rows of `S + noise Id` with a pseudo-inverse
/// built from a symmetric eigendecomposition and compares against the
/// influence solve.
pub fn verify_empirical_projection(state: &SurrogateState, x: &[f64]) -> Result<EmpiricalProjectionReport> {
    let n = state.len();
    if n == 0 {
        state.check(x)?;
        return Ok(EmpiricalProjectionReport {
            feature_is_similarity_row: true,
            influence_residual: 0.0,
            oracle_residual: 0.0,
            coefficient_error: None,
            off_basis_max: 0.0,
        });
    }
    let phi = state.empirical_feature(x)?;
    let row = state.spec().similarity_row_unchecked(x, state.points());
    let ours = state.influence_of_row(&phi)?;

    let g: &DMatrix<f64> = state.gram();
    let phi_v = DVector::from_column_slice(&phi);
    let oracle = symmetric_pinv_solve(g, &phi_v, state.basis().rank_tol())?;
    let oracle_residual = (&phi_v - g * &oracle).norm();

    let coefficient_error = state.is_full_rank().then(|| {
        ours.coefficients
            .iter()
            .zip(oracle.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    });
    let basis = state.basis().basis_rows();
    let off_basis_max = ours
        .coefficients
        .iter()
        .enumerate()
        .filter(|(i, _)| !basis.contains(i))
        .map(|(_, c)| c.abs())
        .fold(0.0, f64::max);

    Ok(EmpiricalProjectionReport {
        feature_is_similarity_row: phi == row,
        influence_residual: ours.residual,
        oracle_residual,
        coefficient_error,
        off_basis_max,
    })
}

/// Minimum-norm least-squares solution of `g z = b` for symmetric `g`,
/// discarding eigenvalues with `|lambda| <= rel_tol * max |lambda|`.
fn symmetric_pinv_solve(g: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> Result<DVector<f64>> {
    let eig = SymmetricEigen::new(g.clone());
    let scale = g.norm().max(f64::MIN_POSITIVE);
    if (eig.recompose() - g).norm() > 1e-12 * scale * g.nrows() as f64 {
        return Err(AboError::Factorization("eigendecomposition does not reproduce the Gram matrix".into()));
    }
    let cutoff = rel_tol * eig.eigenvalues.amax();
    let proj = eig.eigenvectors.transpose() * b;
    let scaled = DVector::from_iterator(
        proj.len(),
        proj.iter()
            .zip(eig.eigenvalues.iter())
            .map(|(p, l)| if l.abs() > cutoff { p / l } else { 0.0 }),
    );
    Ok(&eig.eigenvectors * scaled)
}
