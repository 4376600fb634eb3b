use std::cell::Cell;

use super::coeffs::{maximize_g, pair_terms, PairTerms, RestrictedCoeffs};
use super::{multilinear, trilinear_unchecked, SymmetricTensor3};
use crate::manifold::{
    coordinate_minimize, CoordinateObjective, DescentConfig, DescentTrace, GivensRotation, OrthogonalMatrix,
    Restriction, StoppingRule,
};
use crate::{Error, FlopCounter, Result};

/// `|λ|` at or below this marks a null direction.
pub const NULL_TOLERANCE: f64 = 1e-10;

/// How pair coefficients are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorMode {
    /// Contract `T` against the two columns every step: `O(d³)`.
    Naive,
    /// Keep the fully contracted tensor `T̃_abc = T(u_a, u_b, u_c)` and rotate
    /// it along all three modes after each step: `O(d²)`, after an `O(d⁴)`
    /// setup.
    Accelerated,
}

/// `λ_i` and unit factors `v_i`; `null[i]` marks `|λ_i| ≤ 1e−10`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub lambdas: Vec<f64>,
    pub v: OrthogonalMatrix,
    pub null: Vec<bool>,
}

impl Decomposition {
    pub fn new(lambdas: Vec<f64>, v: OrthogonalMatrix) -> Self {
        let null = lambdas.iter().map(|l| l.abs() <= NULL_TOLERANCE).collect();
        Self { lambdas, v, null }
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }
}

/// Iterate for [`TensorObjective`].
#[derive(Debug, Clone)]
pub struct TensorState {
    u: OrthogonalMatrix,
    /// `T(u_k, u_k, u_k)` for every column.
    diag: Vec<f64>,
    aux: Option<SymmetricTensor3>,
    last_terms: Cell<Option<(usize, usize, PairTerms)>>,
}

impl TensorState {
    pub fn u(&self) -> &OrthogonalMatrix {
        &self.u
    }

    pub fn into_u(self) -> OrthogonalMatrix {
        self.u
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// The contracted tensor (accelerated mode only).
    pub fn aux(&self) -> Option<&SymmetricTensor3> {
        self.aux.as_ref()
    }
}

/// The tensor problem phrased for the generic minimizer (it minimizes `−f`).
#[derive(Debug, Clone, Copy)]
pub struct TensorObjective<'a> {
    t: &'a SymmetricTensor3,
    mode: TensorMode,
}

impl<'a> TensorObjective<'a> {
    pub fn new(t: &'a SymmetricTensor3, mode: TensorMode) -> Self {
        Self { t, mode }
    }

    /// Initial state at `u0`: the diagonal terms, plus the contracted tensor
    /// in accelerated mode.
    pub fn init(&self, u0: OrthogonalMatrix, fc: &mut FlopCounter) -> Result<TensorState> {
        let d = self.t.dim();
        if u0.dim() != d {
            return Err(Error::LengthMismatch(u0.dim(), d));
        }
        let (diag, aux) = match self.mode {
            TensorMode::Naive => {
                let m = u0.as_matrix();
                let diag = (0..d)
                    .map(|k| {
                        let c = m.column(k);
                        trilinear_unchecked(self.t, c.as_slice(), c.as_slice(), c.as_slice())
                    })
                    .collect();
                fc.add((d * (2 * d * d * d + 2 * d * d + 2 * d)) as u64);
                (diag, None)
            }
            TensorMode::Accelerated => {
                let aux = contract_all(self.t, &u0, fc);
                let diag = (0..d).map(|k| aux.get(k, k, k)).collect();
                (diag, Some(aux))
            }
        };
        Ok(TensorState {
            u: u0,
            diag,
            aux,
            last_terms: Cell::new(None),
        })
    }

    fn terms(&self, state: &TensorState, i: usize, j: usize, fc: &mut FlopCounter) -> PairTerms {
        match &state.aux {
            Some(aux) => PairTerms {
                iii: aux.get(i, i, i),
                jjj: aux.get(j, j, j),
                ijj: aux.get(i, j, j),
                jii: aux.get(j, i, i),
            },
            None => {
                let m = state.u.as_matrix();
                pair_terms(self.t, m.column(i).as_slice(), m.column(j).as_slice(), fc)
            }
        }
    }
}

/// `−g(θ)` for one pair; the minimizer comes from [`maximize_g`].
#[derive(Debug, Clone, Copy)]
pub struct TensorRestriction {
    pub coeffs: RestrictedCoeffs,
}

impl Restriction for TensorRestriction {
    fn value(&self, theta: f64, fc: &mut FlopCounter) -> f64 {
        fc.add(11);
        -self.coeffs.g(theta)
    }

    fn minimizer(&self, fc: &mut FlopCounter) -> Option<f64> {
        Some(maximize_g(&self.coeffs, fc))
    }

    fn derivative_at_zero(&self, _fc: &mut FlopCounter) -> f64 {
        -self.coeffs.s1
    }
}

impl CoordinateObjective for TensorObjective<'_> {
    type State = TensorState;
    type Restriction = TensorRestriction;

    fn coordinates(&self, state: &TensorState) -> usize {
        state.diag.len()
    }

    fn eval(&self, state: &TensorState, fc: &mut FlopCounter) -> f64 {
        fc.add(state.diag.len() as u64);
        -state.diag.iter().sum::<f64>()
    }

    fn restrict(&self, state: &TensorState, i: usize, j: usize, fc: &mut FlopCounter) -> TensorRestriction {
        let terms = self.terms(state, i, j, fc);
        state.last_terms.set(Some((i, j, terms)));
        fc.add(12);
        TensorRestriction {
            coeffs: RestrictedCoeffs::from_terms(&terms, self.constant(state, i, j)),
        }
    }

    fn apply(&self, state: &mut TensorState, rotation: &GivensRotation, fc: &mut FlopCounter) {
        let (i, j) = (rotation.i(), rotation.j());
        state
            .u
            .rotate(rotation, fc)
            .expect("pair indices were validated by the driver");
        match state.aux.as_mut() {
            Some(aux) => {
                rotate_aux(aux, i, j, rotation.cos(), rotation.sin(), fc);
                state.diag[i] = aux.get(i, i, i);
                state.diag[j] = aux.get(j, j, j);
            }
            None => {
                let terms = match state.last_terms.take() {
                    Some((a, b, t)) if (a, b) == (i, j) => t,
                    _ => {
                        let m = state.u.as_matrix();
                        // the columns are already rotated; undo nothing, just recompute
                        let d = self.t.dim();
                        let (ci, cj) = (m.column(i), m.column(j));
                        state.diag[i] = trilinear_unchecked(self.t, ci.as_slice(), ci.as_slice(), ci.as_slice());
                        state.diag[j] = trilinear_unchecked(self.t, cj.as_slice(), cj.as_slice(), cj.as_slice());
                        fc.add((2 * (2 * d * d * d + 2 * d * d + 2 * d)) as u64);
                        return;
                    }
                };
                let (ni, nj) = terms.rotated_diagonal(rotation.cos(), rotation.sin());
                fc.add(30);
                state.diag[i] = ni;
                state.diag[j] = nj;
            }
        }
    }

    fn restricted_constant(&self, state: &TensorState, i: usize, j: usize) -> f64 {
        -self.constant(state, i, j)
    }
}

impl TensorObjective<'_> {
    fn constant(&self, state: &TensorState, i: usize, j: usize) -> f64 {
        state
            .diag
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != i && *k != j)
            .map(|(_, v)| v)
            .sum()
    }
}

/// `T̃_abc = T(u_a, u_b, u_c)` for all `a, b, c`; `6d⁴` flops.
pub fn contract_all(t: &SymmetricTensor3, u: &OrthogonalMatrix, fc: &mut FlopCounter) -> SymmetricTensor3 {
    let values = multilinear(t, u.as_matrix(), fc);
    // exact symmetry of the input is preserved up to rounding; keep the
    // values as computed so the update below stays a pure rotation
    SymmetricTensor3 { dim: t.dim(), values }
}

/// Brings the contracted tensor up to date after columns `i, j` of `U` were
/// rotated by `θ`: a plane rotation along each of the three modes. Only
/// entries with an index in `{i, j}` change; `18d²` flops.
pub fn accelerated_state_update(
    aux: &mut SymmetricTensor3,
    i: usize,
    j: usize,
    theta: f64,
    fc: &mut FlopCounter,
) -> Result<()> {
    let d = aux.dim();
    if i >= j || j >= d {
        return Err(Error::InvalidCoordinate { i, j, dim: d });
    }
    if !theta.is_finite() {
        return Err(Error::NonFinite { theta });
    }
    let (s, c) = theta.sin_cos();
    rotate_aux(aux, i, j, c, s, fc);
    Ok(())
}

fn rotate_aux(aux: &mut SymmetricTensor3, i: usize, j: usize, c: f64, s: f64, fc: &mut FlopCounter) {
    let d = aux.dim();
    let v = aux.values_mut();
    let mut turn = |p: usize, q: usize| {
        let x = v[p];
        let y = v[q];
        v[p] = c * x + s * y;
        v[q] = c * y - s * x;
    };
    // first index
    for bc in 0..d * d {
        turn(i * d * d + bc, j * d * d + bc);
    }
    // second index
    for a in 0..d {
        for cc in 0..d {
            turn((a * d + i) * d + cc, (a * d + j) * d + cc);
        }
    }
    // third index
    for ab in 0..d * d {
        turn(ab * d + i, ab * d + j);
    }
    fc.add((18 * d * d) as u64);
}

/// Gradient norm `1e−9` or `50·d²` iterations.
pub fn default_tensor_stop(d: usize) -> StoppingRule {
    StoppingRule {
        max_iters: Some(50 * (d * d) as u64),
        grad_tol: Some(1e-9),
        ..StoppingRule::default()
    }
}

/// Randomized Givens coordinate ascent on `Σ_i T(u_i, u_i, u_i)` from `u0`.
///
/// Afterwards `λ_i = T(u_i, u_i, u_i)`; a column with `λ_i < −1e−10` is
/// negated so its weight becomes positive. The trace is in the maximize
/// sense.
pub fn tensor_decompose(
    t: &SymmetricTensor3,
    u0: OrthogonalMatrix,
    config: &DescentConfig,
    mode: TensorMode,
    fc: &mut FlopCounter,
) -> Result<(Decomposition, DescentTrace)> {
    config.stop.validate()?;
    let d = t.dim();
    if d < 2 {
        return Err(Error::InvalidDimension(format!("need d >= 2 to rotate, got {d}")));
    }
    let obj = TensorObjective::new(t, mode);
    let state = obj.init(u0, fc)?;
    let (state, trace) = coordinate_minimize(&obj, state, config, fc)?;
    let mut v = state.into_u();
    let mut lambdas = Vec::with_capacity(d);
    for k in 0..d {
        let col = v.as_matrix().column(k);
        let l = trilinear_unchecked(t, col.as_slice(), col.as_slice(), col.as_slice());
        if l < -NULL_TOLERANCE {
            v.negate_column(k);
            lambdas.push(-l);
        } else {
            lambdas.push(l);
        }
    }
    fc.add((d * (2 * d * d * d + 2 * d * d + 2 * d)) as u64);
    Ok((Decomposition::new(lambdas, v), trace.negated()))
}
