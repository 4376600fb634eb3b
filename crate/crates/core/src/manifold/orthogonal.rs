use nalgebra::{DMatrix, DVectorView};

use super::givens::{rotate_columns, GivensRotation};
use crate::{Error, FlopCounter, Result};

/// Largest `‖UᵀU − I‖_F` accepted on construction.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-8;

/// Returns `‖UᵀU − I‖_F`.
pub fn orthogonality_defect(u: &DMatrix<f64>) -> f64 {
    let gram = u.transpose() * u;
    let n = gram.nrows();
    let mut sum = 0.0;
    for c in 0..n {
        for r in 0..n {
            let e = gram[(r, c)] - if r == c { 1.0 } else { 0.0 };
            sum += e * e;
        }
    }
    sum.sqrt()
}

/// A square matrix with orthonormal columns.
///
/// The invariant is checked when the matrix is built from raw entries.
/// Rotations applied through [`OrthogonalMatrix::rotate`] keep it up to
/// rounding drift; nothing re-orthogonalizes, so [`defect`](Self::defect)
/// reports the accumulated drift.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMatrix {
    entries: DMatrix<f64>,
}

impl OrthogonalMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::Shape(format!(
                "orthogonal matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.nrows() == 0 {
            return Err(Error::InvalidDimension("dimension must be at least 1".into()));
        }
        let defect = orthogonality_defect(&entries);
        if !(defect <= ORTHOGONALITY_TOLERANCE) {
            return Err(Error::NotOrthogonal {
                defect,
                tolerance: ORTHOGONALITY_TOLERANCE,
            });
        }
        Ok(Self { entries })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: DMatrix::identity(dim, dim),
        }
    }

    pub(crate) fn from_trusted(entries: DMatrix<f64>) -> Self {
        debug_assert!(entries.is_square());
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn column(&self, k: usize) -> DVectorView<'_, f64> {
        self.entries.column(k)
    }

    pub fn defect(&self) -> f64 {
        orthogonality_defect(&self.entries)
    }

    /// Re-checks the invariant against [`ORTHOGONALITY_TOLERANCE`].
    pub fn check(&self) -> Result<()> {
        let defect = self.defect();
        if defect <= ORTHOGONALITY_TOLERANCE {
            Ok(())
        } else {
            Err(Error::NotOrthogonal {
                defect,
                tolerance: ORTHOGONALITY_TOLERANCE,
            })
        }
    }

    /// `U ← U·G`, costing `6d` flops.
    pub fn rotate(&mut self, g: &GivensRotation, fc: &mut FlopCounter) -> Result<()> {
        rotate_columns(&mut self.entries, g, fc)
    }

    /// Negates column `k`; the result is still orthogonal.
    pub fn negate_column(&mut self, k: usize) {
        self.entries.column_mut(k).neg_mut();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_zero_defect() {
        assert_eq!(orthogonality_defect(&DMatrix::identity(4, 4)), 0.0);
    }

    #[test]
    fn scaled_identity_defect() {
        // (2I)ᵀ(2I) − I = 3I, Frobenius norm 3√2
        let u = DMatrix::identity(2, 2) * 2.0;
        assert!((orthogonality_defect(&u) - 3.0 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_orthogonal() {
        let u = DMatrix::identity(3, 3) * 1.001;
        assert!(matches!(
            OrthogonalMatrix::new(u),
            Err(Error::NotOrthogonal { .. })
        ));
        assert!(matches!(
            OrthogonalMatrix::new(DMatrix::zeros(2, 3)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn negating_a_column_stays_orthogonal() {
        let mut u = OrthogonalMatrix::identity(3);
        u.negate_column(1);
        assert_eq!(u.defect(), 0.0);
        assert_eq!(u.as_matrix()[(1, 1)], -1.0);
    }
}
