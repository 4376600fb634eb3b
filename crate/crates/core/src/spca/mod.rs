//! Sparse PCA by Givens coordinate ascent on the thresholded objective
//!
//! ```text
//! max_U  Σ_j Σ_k [ |(A·U)_kj| − γ ]₊²     s.t. UᵀU = I
//! ```
//!
//! in the full case where `U` is `n×n`. Only `A·U` is stored; every rotation
//! touches two of its columns. Loadings are recovered at the end by
//! soft-thresholding and column normalization ([`solve_for_z`]).

mod metrics;
mod objective;
mod solve;

pub use metrics::{adjusted_explained_variance, sparsity, AdjustedVariance, NONZERO_THRESHOLD};
pub use objective::{spca_coordinate_g, spca_objective, spca_step, SpcaObjective, SpcaRestriction, SpcaState};
pub use solve::{solve_for_z, spca_full, SparseLoadings, SpcaResult};

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Data matrix `A ∈ R^{d×n}`: rows are features, columns are observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    entries: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::InvalidDimension(format!(
                "data matrix must be non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % entries.nrows(), pos / entries.nrows());
            return Err(Error::Shape(format!("non-finite entry at ({r}, {c})")));
        }
        Ok(Self { entries })
    }

    /// Feature count `d`.
    pub fn features(&self) -> usize {
        self.entries.nrows()
    }

    /// Sample count `n`.
    pub fn samples(&self) -> usize {
        self.entries.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn max_row_norm(&self) -> f64 {
        self.entries
            .row_iter()
            .map(|r| r.norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_squared(&self) -> f64 {
        self.entries.norm_squared()
    }
}
