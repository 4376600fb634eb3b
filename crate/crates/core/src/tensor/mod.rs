//! Orthogonal decomposition of symmetric third-order tensors
//!
//! ```text
//! max_U  f(U) = Σ_i T(u_i, u_i, u_i)     s.t. UᵀU = I
//! ```
//!
//! For `T = Σ λ_i v_i⊗v_i⊗v_i` with orthonormal `v_i` and `λ_i > 0` the
//! maximizers are the signed permutations of `V`, and the maximum is `Σ λ_i`.
//! Restricted to one Givens pair the objective is a cubic trigonometric
//! polynomial ([`RestrictedCoeffs`]) that is maximized in closed form.

mod coeffs;
mod solver;

pub use coeffs::{contract_pair, maximize_g, PairTerms, RestrictedCoeffs};
pub use solver::{
    accelerated_state_update, contract_all, default_tensor_stop, tensor_decompose, Decomposition, TensorMode,
    TensorObjective, TensorRestriction, TensorState, NULL_TOLERANCE,
};

use nalgebra::DMatrix;

use crate::manifold::OrthogonalMatrix;
use crate::{Error, FlopCounter, Result};

/// Default symmetry tolerance, relative to `max(1, max|T|)`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Dense symmetric `d×d×d` tensor, stored with the first index slowest:
/// entry `(a, b, c)` lives at `(a·d + b)·d + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTensor3 {
    dim: usize,
    values: Vec<f64>,
}

impl SymmetricTensor3 {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(dim, values, SYMMETRY_TOLERANCE)
    }

    /// Accepts the values if every permutation agrees within
    /// `tol·max(1, max|T|)`.
    pub fn with_tolerance(dim: usize, values: Vec<f64>, tol: f64) -> Result<Self> {
        check_len(dim, &values)?;
        let asym = max_asymmetry(dim, &values);
        let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if !(asym <= tol * scale) {
            return Err(Error::NotSymmetric { max_asymmetry: asym });
        }
        Ok(Self { dim, values })
    }

    /// Averages over the six index permutations.
    pub fn symmetrized(dim: usize, values: Vec<f64>) -> Result<Self> {
        check_len(dim, &values)?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Shape(format!("non-finite tensor entry {v}")));
        }
        let mut out = vec![0.0; values.len()];
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    let at = |x: usize, y: usize, z: usize| values[(x * dim + y) * dim + z];
                    let sum = at(a, b, c) + at(a, c, b) + at(b, a, c) + at(b, c, a) + at(c, a, b) + at(c, b, a);
                    out[(a * dim + b) * dim + c] = sum / 6.0;
                }
            }
        }
        Ok(Self { dim, values: out })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            values: vec![0.0; dim * dim * dim],
        }
    }

    /// `T_aaa = λ_a`, zero elsewhere.
    pub fn diagonal(lambdas: &[f64]) -> Self {
        let d = lambdas.len();
        let mut t = Self::zeros(d);
        for (a, &l) in lambdas.iter().enumerate() {
            t.values[(a * d + a) * d + a] = l;
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.values[(a * self.dim + b) * self.dim + c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_asymmetry(&self) -> f64 {
        max_asymmetry(self.dim, &self.values)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Entrywise sum; both tensors must have the same dimension.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::LengthMismatch(self.dim, other.dim));
        }
        Ok(Self {
            dim: self.dim,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }
}

fn check_len(dim: usize, values: &[f64]) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidDimension("tensor dimension must be positive".into()));
    }
    if values.len() != dim * dim * dim {
        return Err(Error::Shape(format!(
            "a {dim}-dimensional tensor needs {} values, got {}",
            dim * dim * dim,
            values.len()
        )));
    }
    Ok(())
}

fn max_asymmetry(dim: usize, values: &[f64]) -> f64 {
    let at = |a: usize, b: usize, c: usize| values[(a * dim + b) * dim + c];
    let mut worst = 0.0f64;
    for a in 0..dim {
        for b in a..dim {
            for c in b..dim {
                let x = at(a, b, c);
                for y in [at(a, c, b), at(b, a, c), at(b, c, a), at(c, a, b), at(c, b, a)] {
                    let diff = (x - y).abs();
                    // NaN must not pass as symmetric
                    if diff.is_nan() {
                        return f64::INFINITY;
                    }
                    worst = worst.max(diff);
                }
            }
        }
    }
    worst
}

/// `T(u, v, w) = Σ_abc T_abc u_a v_b w_c`; charges `2d³ + 2d² + 2d`.
pub fn trilinear(t: &SymmetricTensor3, u: &[f64], v: &[f64], w: &[f64], fc: &mut FlopCounter) -> Result<f64> {
    let d = t.dim;
    for x in [u.len(), v.len(), w.len()] {
        if x != d {
            return Err(Error::LengthMismatch(x, d));
        }
    }
    fc.add((2 * d * d * d + 2 * d * d + 2 * d) as u64);
    Ok(trilinear_unchecked(t, u, v, w))
}

#[inline]
pub(crate) fn trilinear_unchecked(t: &SymmetricTensor3, u: &[f64], v: &[f64], w: &[f64]) -> f64 {
    let d = t.dim;
    let mut total = 0.0;
    for (a, &ua) in u.iter().enumerate() {
        let mut row = 0.0;
        for (b, &vb) in v.iter().enumerate() {
            let fiber = &t.values[(a * d + b) * d..(a * d + b + 1) * d];
            let dot: f64 = fiber.iter().zip(w).map(|(x, y)| x * y).sum();
            row += dot * vb;
        }
        total += row * ua;
    }
    total
}

/// `f(U) = Σ_i T(u_i, u_i, u_i)`.
pub fn tensor_objective(t: &SymmetricTensor3, u: &OrthogonalMatrix, fc: &mut FlopCounter) -> Result<f64> {
    if u.dim() != t.dim {
        return Err(Error::LengthMismatch(u.dim(), t.dim));
    }
    let mut sum = 0.0;
    for k in 0..t.dim {
        let col = u.as_matrix().column(k);
        let c = col.as_slice();
        sum += trilinear(t, c, c, c, fc)?;
    }
    fc.add(t.dim as u64);
    Ok(sum)
}

/// `T ×₁ Wᵀ ×₂ Wᵀ ×₃ Wᵀ` for `W` of shape `D×k`: the `k×k×k` tensor with
/// entries `Σ_pqr T_pqr W_pa W_qb W_rc`. Charges `2D(kD² + k²D + k³)`.
pub(crate) fn multilinear(t: &SymmetricTensor3, w: &DMatrix<f64>, fc: &mut FlopCounter) -> Vec<f64> {
    let big = t.dim;
    let k = w.ncols();
    // mode 3: x[p][q][c] = Σ_r T[p][q][r] W[r][c]
    let mut x = vec![0.0; big * big * k];
    for pq in 0..big * big {
        let fiber = &t.values[pq * big..(pq + 1) * big];
        for c in 0..k {
            let wc = w.column(c);
            x[pq * k + c] = fiber.iter().zip(wc.iter()).map(|(a, b)| a * b).sum();
        }
    }
    // mode 2: y[p][b][c] = Σ_q x[p][q][c] W[q][b]
    let mut y = vec![0.0; big * k * k];
    for p in 0..big {
        for q in 0..big {
            let src = &x[(p * big + q) * k..(p * big + q + 1) * k];
            for b in 0..k {
                let wqb = w[(q, b)];
                let dst = &mut y[(p * k + b) * k..(p * k + b + 1) * k];
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += wqb * s;
                }
            }
        }
    }
    // mode 1: z[a][b][c] = Σ_p y[p][b][c] W[p][a]
    let mut z = vec![0.0; k * k * k];
    for p in 0..big {
        let src = &y[p * k * k..(p + 1) * k * k];
        for a in 0..k {
            let wpa = w[(p, a)];
            let dst = &mut z[a * k * k..(a + 1) * k * k];
            for (o, s) in dst.iter_mut().zip(src) {
                *o += wpa * s;
            }
        }
    }
    fc.add((2 * big * (k * big * big + k * k * big + k * k * k)) as u64);
    z
}

/// `Σ λ_i v_i⊗v_i⊗v_i`. Non-negative, finite weights are required.
pub fn synth_orthogonal_tensor(lambdas: &[f64], v: &OrthogonalMatrix) -> Result<SymmetricTensor3> {
    let d = v.dim();
    if lambdas.len() != d {
        return Err(Error::LengthMismatch(lambdas.len(), d));
    }
    if let Some(l) = lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::Config(format!("tensor weights must be finite and >= 0, got {l}")));
    }
    v.check()?;
    Ok(rank_one_sum(lambdas, v.as_matrix()))
}

pub(crate) fn rank_one_sum(lambdas: &[f64], v: &DMatrix<f64>) -> SymmetricTensor3 {
    let d = v.nrows();
    let mut t = SymmetricTensor3::zeros(d);
    for (k, &l) in lambdas.iter().enumerate() {
        let col = v.column(k);
        for a in 0..d {
            let la = l * col[a];
            for b in 0..d {
                let lab = la * col[b];
                let row = &mut t.values[(a * d + b) * d..(a * d + b + 1) * d];
                for (x, vc) in row.iter_mut().zip(col.iter()) {
                    *x += lab * vc;
                }
            }
        }
    }
    t
}

/// `‖T − Σ λ_i v_i⊗v_i⊗v_i‖_F` over all `d³` entries.
pub fn decomposition_residual(t: &SymmetricTensor3, dec: &Decomposition) -> f64 {
    let approx = rank_one_sum(&dec.lambdas, dec.v.as_matrix());
    t.values
        .iter()
        .zip(&approx.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}
