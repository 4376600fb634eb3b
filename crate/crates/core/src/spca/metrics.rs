use nalgebra::{DMatrix, DVector};

use super::DataMatrix;

/// Magnitude above which a loading counts as non-zero.
pub const NONZERO_THRESHOLD: f64 = 1e-12;

/// Fraction of entries of `Z` with `|z| > 1e−12`.
pub fn sparsity(z: &DMatrix<f64>) -> f64 {
    if z.is_empty() {
        return 0.0;
    }
    let nnz = z.iter().filter(|v| v.abs() > NONZERO_THRESHOLD).count();
    nnz as f64 / z.len() as f64
}

/// Variance explained by possibly non-orthogonal components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjustedVariance {
    /// `Σ_j R_jj²` where `AᵀZ = QR`.
    pub raw: f64,
    /// `raw / ‖A‖²_F`.
    pub normalized: f64,
    /// Columns of `AᵀZ` that survived orthogonalization.
    pub effective_rank: usize,
}

/// Relative residual below which a score column counts as dependent.
const DEPENDENT_COLUMN: f64 = 1e-10;

/// Adjusted explained variance: scores `Y = AᵀZ` are orthogonalized column
/// by column (so later components only get credit for variance the earlier
/// ones missed) and the squared diagonal of the triangular factor is summed.
/// Dependent columns contribute zero and are left out of the rank.
pub fn adjusted_explained_variance(a: &DataMatrix, z: &DMatrix<f64>) -> AdjustedVariance {
    let y = a.as_matrix().transpose() * z;
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut raw = 0.0;
    for col in y.column_iter() {
        let original = col.norm();
        if original == 0.0 {
            continue;
        }
        let mut r: DVector<f64> = col.into_owned();
        // two Gram–Schmidt passes keep the residual orthogonal to working precision
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&r);
                r.axpy(-proj, q, 1.0);
            }
        }
        let rjj = r.norm();
        if rjj <= DEPENDENT_COLUMN * original {
            continue;
        }
        raw += rjj * rjj;
        basis.push(r / rjj);
    }
    let total = a.frobenius_squared();
    AdjustedVariance {
        raw,
        normalized: if total > 0.0 { raw / total } else { 0.0 },
        effective_rank: basis.len(),
    }
}
