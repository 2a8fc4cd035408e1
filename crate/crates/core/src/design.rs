use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, invalid, Result};

/// Tolerance on unit column norms for a design flagged as normalized.
pub const NORMALIZED_TOL: f64 = 1e-12;

/// A fixed n×p design matrix together with its column norms.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    column_norms: DVector<f64>,
    normalized: bool,
}

impl DesignMatrix {
    /// Wraps a matrix after checking that it is non-empty and finite.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(invalid("design matrix must have at least one row and one column"));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (i, j) = (pos % values.nrows(), pos / values.nrows());
            return Err(invalid(format!("design entry ({i}, {j}) is not finite")));
        }
        let column_norms = DVector::from_iterator(
            values.ncols(),
            values.column_iter().map(|c| c.norm()),
        );
        let normalized = column_norms
            .iter()
            .all(|&norm| (norm - 1.0).abs() <= NORMALIZED_TOL);
        Ok(Self {
            values,
            column_norms,
            normalized,
        })
    }

    /// Builds a design from row-major data.
    pub fn from_row_slice(n: usize, p: usize, data: &[f64]) -> Result<Self> {
        check_len("design data", n * p, data.len())?;
        Self::new(DMatrix::from_row_slice(n, p, data))
    }

    /// Returns a copy with every column scaled to unit Euclidean norm.
    pub fn normalize_columns(&self) -> Result<Self> {
        let mut values = self.values.clone();
        for (j, mut col) in values.column_iter_mut().enumerate() {
            let norm = self.column_norms[j];
            if norm == 0.0 {
                return Err(invalid(format!("column {j} is identically zero")));
            }
            col /= norm;
        }
        Self::new(values)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column_norms(&self) -> &DVector<f64> {
        &self.column_norms
    }

    /// True when every column has unit norm within [`NORMALIZED_TOL`].
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Largest absolute entry, `max_ij |X_ij|`.
    pub fn max_abs_entry(&self) -> f64 {
        self.values.amax()
    }

    /// Columns indexed by `indices`, in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> DMatrix<f64> {
        self.values.select_columns(indices)
    }

    /// `Xᵀv` for a length-n vector.
    pub fn xt_times(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("response", self.n(), v.len())?;
        Ok(self.values.tr_mul(v))
    }

    /// `Xb` for a length-p vector.
    pub fn times(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("coefficient vector", self.p(), b.len())?;
        Ok(&self.values * b)
    }
}
