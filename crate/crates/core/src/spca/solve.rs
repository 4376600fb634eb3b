use nalgebra::DMatrix;

use super::objective::{SpcaObjective, SpcaState};
use super::DataMatrix;
use crate::manifold::{coordinate_minimize, DescentConfig, DescentTrace, OrthogonalMatrix};
use crate::{Error, FlopCounter, Result};

/// Unit-norm sparse loadings `Z` (`d×m`).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseLoadings {
    pub z: DMatrix<f64>,
    /// Non-zero count per column.
    pub support: Vec<usize>,
    /// Columns that thresholded to zero; they are left as zero vectors.
    pub zero_columns: Vec<bool>,
}

impl SparseLoadings {
    pub fn nonzeros(&self) -> usize {
        self.support.iter().sum()
    }
}

/// Soft-threshold each column of `A·U` by `γ` and normalize it.
///
/// `z_kj = sign(AU_kj)·[|AU_kj| − γ]₊`, then `z_:j /= ‖z_:j‖`. This is the
/// exact maximizer over unit-norm columns of `Tr(Zᵀ·AU) − γ·Σ|Z_kj|` for
/// fixed `U`.
pub fn solve_for_z(au: &DMatrix<f64>, gamma: f64) -> SparseLoadings {
    let (d, m) = au.shape();
    let mut z = DMatrix::zeros(d, m);
    let mut support = vec![0; m];
    let mut zero_columns = vec![false; m];
    for j in 0..m {
        let mut col = z.column_mut(j);
        for k in 0..d {
            let x = au[(k, j)];
            let t = x.abs() - gamma;
            if t > 0.0 {
                col[k] = t.copysign(x);
                support[j] += 1;
            }
        }
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        } else {
            zero_columns[j] = true;
        }
    }
    SparseLoadings {
        z,
        support,
        zero_columns,
    }
}

#[derive(Debug, Clone)]
pub struct SpcaResult {
    pub loadings: SparseLoadings,
    /// Objective in the maximization sense.
    pub trace: DescentTrace,
    /// Final `A·U`.
    pub state: SpcaState,
}

/// Full-case sparse PCA (`m = n`): ascent on `A·U` from `A·U0`, then
/// [`solve_for_z`].
///
/// The initial product is charged as `d·n·(2n − 1)` flops.
pub fn spca_full(
    a: &DataMatrix,
    gamma: f64,
    u0: &OrthogonalMatrix,
    config: &DescentConfig,
    fc: &mut FlopCounter,
) -> Result<SpcaResult> {
    let (d, n) = (a.features(), a.samples());
    if u0.dim() != n {
        return Err(Error::Shape(format!(
            "initial rotation is {0}x{0} but the data has {n} samples",
            u0.dim()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidDimension(format!(
            "need at least 2 samples to rotate, got {n}"
        )));
    }
    let max_row_norm = a.max_row_norm();
    if gamma >= max_row_norm {
        return Err(Error::DegeneratePenalty { gamma, max_row_norm });
    }
    config.stop.validate()?;
    let au = a.as_matrix() * u0.as_matrix();
    fc.add((d * n * (2 * n - 1)) as u64);
    let state = SpcaState::new(au, gamma)?;
    let (state, trace) = coordinate_minimize(&SpcaObjective, state, config, fc)?;
    let loadings = solve_for_z(state.au(), gamma);
    Ok(SpcaResult {
        loadings,
        trace: trace.negated(),
        state,
    })
}
