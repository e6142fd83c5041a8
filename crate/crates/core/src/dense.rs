//! Thin wrappers over faer dense factorizations.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Eigen-decomposition of a symmetric matrix, eigenvalues non-increasing.
/// Column `j` of the returned vectors (`vectors[i][j]`) pairs with value `j`.
pub fn symmetric_eigen(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = a.nrows();
    let eig = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Singular(format!("eigensolver failed: {e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    // faer returns non-decreasing order.
    let values: Vec<f64> = (0..n).rev().map(|j| s[j]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, n - 1 - j)]);
    Ok((values, vectors))
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eigen_range(a: &Mat<f64>) -> Result<(f64, f64)> {
    let v = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Singular(format!("eigensolver failed: {e:?}")))?;
    Ok((v[0], v[v.len() - 1]))
}

/// Dense Cholesky factor of an SPD matrix.
pub struct Cholesky {
    llt: faer::linalg::solvers::Llt<f64>,
    n: usize,
}

impl Cholesky {
    pub fn new(a: &Mat<f64>) -> Option<Self> {
        a.llt(Side::Lower).ok().map(|llt| Cholesky { llt, n: a.nrows() })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut m = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.llt.solve_in_place(m.as_mut());
        (0..self.n).map(|i| m[(i, 0)]).collect()
    }

    pub fn inverse(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::identity(self.n, self.n);
        self.llt.solve_in_place(m.as_mut());
        m
    }

    pub fn log_det(&self) -> f64 {
        let l = self.llt.L();
        (0..self.n).map(|i| 2.0 * l[(i, i)].ln()).sum()
    }
}

impl std::fmt::Debug for Cholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cholesky").field("n", &self.n).finish()
    }
}
