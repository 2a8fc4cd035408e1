//! Small dense helpers around symmetric positive-definite Gram matrices.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Condition number above which a Gram matrix is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Cholesky factorization of a Gram matrix that passed the conditioning check.
#[derive(Debug, Clone)]
pub struct GramFactor {
    chol: Cholesky<f64, Dyn>,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
}

impl GramFactor {
    /// Factors `XᵀX` for the given columns.
    pub fn of_columns(columns: &DMatrix<f64>) -> Result<Self> {
        Self::new(columns.tr_mul(columns))
    }

    /// Factors a symmetric matrix, rejecting it when the spectral condition
    /// number exceeds [`MAX_CONDITION`] or it is not positive definite.
    pub fn new(gram: DMatrix<f64>) -> Result<Self> {
        let (min_eigenvalue, max_eigenvalue) = eigen_range(&gram);
        let condition = if min_eigenvalue > 0.0 {
            max_eigenvalue / min_eigenvalue
        } else {
            f64::INFINITY
        };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::RankDeficient { condition });
        }
        let chol = Cholesky::new(gram).ok_or(Error::RankDeficient { condition })?;
        Ok(Self {
            chol,
            min_eigenvalue,
            max_eigenvalue,
        })
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    pub fn solve_matrix(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(rhs)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.max_eigenvalue
    }

    pub fn condition(&self) -> f64 {
        self.max_eigenvalue / self.min_eigenvalue
    }
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eigen_range(sym: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(sym.clone());
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}
