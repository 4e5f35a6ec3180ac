use nalgebra::{DMatrix, DVector};

/// A maximal linearly independent set of rows of a square matrix, together
/// with a QR factorisation of the selected rows (transposed).
///
/// With `B` the `r x n` selected rows and `B^T = Q R`, `R^T R = B B^T`, so `R`
/// is the Cholesky factor of `B B^T` and the reduced least-squares problem
/// `min_J |s - J B|` is solved by `J^T = R^{-1} Q^T s^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisCache {
    basis_rows: Vec<usize>,
    rows: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    rank_tol: f64,
}

impl BasisCache {
    /// Ascending indices of the selected rows.
    pub fn basis_rows(&self) -> &[usize] {
        &self.basis_rows
    }

    pub fn rank(&self) -> usize {
        self.basis_rows.len()
    }

    /// The selected rows `B` (`r x n`).
    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// Upper-triangular factor with `R^T R = B B^T`.
    pub fn gram_factor(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// `J = s B^T (B B^T)^{-1}` for a length-`n` row `s`.
    pub(crate) fn reduced_coefficients(&self, s: &[f64]) -> Vec<f64> {
        if self.rank() == 0 {
            return Vec::new();
        }
        let qts = self.q.tr_mul(&DVector::from_column_slice(s));
        self.r
            .solve_upper_triangular(&qts)
            .expect("basis factor has a non-zero diagonal")
            .iter()
            .copied()
            .collect()
    }

    /// `B^T (B B^T)^{-1} v` for a length-`r` vector `v`, i.e. `Q R^{-T} v`.
    pub(crate) fn lift(&self, v: &[f64]) -> Vec<f64> {
        if self.rank() == 0 {
            return vec![0.0; self.q.nrows()];
        }
        let w = self
            .r
            .tr_solve_upper_triangular(&DVector::from_column_slice(v))
            .expect("basis factor has a non-zero diagonal");
        (&self.q * w).iter().copied().collect()
    }
}

/// Selects rows of `m` in index order, keeping a row when the norm of its
/// component orthogonal to the rows already kept exceeds
/// `rank_tol * max_row_norm`. The lowest admissible index always wins, so the
/// selection is deterministic.
pub fn row_basis(m: &DMatrix<f64>, rank_tol: f64) -> BasisCache {
    let n = m.nrows();
    let cols = m.ncols();
    let max_norm = (0..n).map(|i| m.row(i).norm()).fold(0.0, f64::max);
    let threshold = rank_tol * max_norm;

    let mut basis_rows = Vec::new();
    let mut ortho: Vec<DVector<f64>> = Vec::new();
    if max_norm > 0.0 {
        for i in 0..n {
            let mut v: DVector<f64> = m.row(i).transpose();
            // Two Gram-Schmidt passes keep the residual accurate near rank loss.
            for _ in 0..2 {
                for q in &ortho {
                    let c = q.dot(&v);
                    v.axpy(-c, q, 1.0);
                }
            }
            let norm = v.norm();
            if norm > threshold {
                v /= norm;
                ortho.push(v);
                basis_rows.push(i);
            }
        }
    }

    let r_count = basis_rows.len();
    let mut rows = DMatrix::zeros(r_count, cols);
    for (k, &i) in basis_rows.iter().enumerate() {
        rows.row_mut(k).copy_from(&m.row(i));
    }
    let (q, r) = if r_count == 0 {
        (DMatrix::zeros(cols, 0), DMatrix::zeros(0, 0))
    } else {
        let qr = rows.transpose().qr();
        (qr.q(), qr.r())
    };
    BasisCache {
        basis_rows,
        rows,
        q,
        r,
        rank_tol,
    }
}
