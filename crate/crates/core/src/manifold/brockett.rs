//! Reference objectives on `O(d)`: the Brockett cost with its closed-form
//! restriction, and a closure-backed objective for anything else.

use nalgebra::{DMatrix, DVector};

use super::descent::{CoordinateObjective, Restriction};
use super::givens::{rotate_columns, GivensRotation};
use super::linesearch::wrap_angle;
use super::orthogonal::OrthogonalMatrix;
use crate::{Error, FlopCounter, Result};
use std::f64::consts::FRAC_PI_2;

/// `f(U) = Tr(UᵀAUN)` with symmetric `A` and diagonal `N`.
///
/// Its minimum over `O(d)` pairs the eigenvalues of `A` in ascending order
/// with the diagonal of `N` in descending order, which makes it a convenient
/// test problem with a known answer.
#[derive(Debug, Clone)]
pub struct BrockettObjective {
    a: DMatrix<f64>,
    weights: Vec<f64>,
    closed_form: bool,
}

impl BrockettObjective {
    pub fn new(a: DMatrix<f64>, weights: Vec<f64>) -> Result<Self> {
        let d = a.nrows();
        if !a.is_square() || weights.len() != d {
            return Err(Error::Shape(format!(
                "A is {}x{}, N has {} entries",
                a.nrows(),
                a.ncols(),
                weights.len()
            )));
        }
        if (&a - a.transpose()).abs().max() > 1e-12 * a.abs().max().max(1.0) {
            return Err(Error::Shape("A must be symmetric".into()));
        }
        Ok(Self {
            a,
            weights,
            closed_form: true,
        })
    }

    /// Forces the numeric line search instead of the closed-form minimizer.
    pub fn without_closed_form(mut self) -> Self {
        self.closed_form = false;
        self
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Minimum over `O(d)` from the spectrum of `A`.
    pub fn minimum(&self) -> f64 {
        let mut eig: Vec<f64> = self.a.clone().symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        let mut w = self.weights.clone();
        w.sort_by(|x, y| y.total_cmp(x));
        eig.iter().zip(&w).map(|(l, n)| l * n).sum()
    }

    fn quadratic(&self, u: &DMatrix<f64>, k: usize, l: usize, fc: &mut FlopCounter) -> f64 {
        let d = self.dim() as u64;
        fc.add(2 * d * d + 2 * d);
        let au: DVector<f64> = &self.a * u.column(l);
        u.column(k).dot(&au)
    }
}

/// `g(θ) = base + p·cos 2θ + q·sin 2θ`.
#[derive(Debug, Clone, Copy)]
pub struct BrockettRestriction {
    base: f64,
    p: f64,
    q: f64,
    closed_form: bool,
}

impl Restriction for BrockettRestriction {
    fn value(&self, theta: f64, fc: &mut FlopCounter) -> f64 {
        fc.add(6);
        let (s, c) = (2.0 * theta).sin_cos();
        self.base + self.p * c + self.q * s
    }

    fn minimizer(&self, _fc: &mut FlopCounter) -> Option<f64> {
        if !self.closed_form {
            return None;
        }
        if self.p == 0.0 && self.q == 0.0 {
            return Some(0.0);
        }
        // period π: take the representative in [−π/2, π/2)
        let t = (-self.q).atan2(-self.p) / 2.0;
        Some(if t >= FRAC_PI_2 { t - std::f64::consts::PI } else { wrap_angle(t) })
    }

    fn derivative_at_zero(&self, fc: &mut FlopCounter) -> f64 {
        fc.add(1);
        2.0 * self.q
    }
}

impl CoordinateObjective for BrockettObjective {
    type State = OrthogonalMatrix;
    type Restriction = BrockettRestriction;

    fn coordinates(&self, state: &OrthogonalMatrix) -> usize {
        state.dim()
    }

    fn eval(&self, state: &OrthogonalMatrix, fc: &mut FlopCounter) -> f64 {
        let u = state.as_matrix();
        (0..self.dim())
            .map(|k| {
                fc.add(2);
                self.weights[k] * self.quadratic(u, k, k, fc)
            })
            .sum()
    }

    fn restrict(&self, state: &OrthogonalMatrix, i: usize, j: usize, fc: &mut FlopCounter) -> BrockettRestriction {
        let u = state.as_matrix();
        let a = self.quadratic(u, i, i, fc);
        let b = self.quadratic(u, j, j, fc);
        let e = self.quadratic(u, i, j, fc);
        let (ni, nj) = (self.weights[i], self.weights[j]);
        fc.add(10);
        BrockettRestriction {
            base: (ni + nj) * (a + b) / 2.0,
            p: (ni - nj) * (a - b) / 2.0,
            q: (ni - nj) * e,
            closed_form: self.closed_form,
        }
    }

    fn apply(&self, state: &mut OrthogonalMatrix, rotation: &GivensRotation, fc: &mut FlopCounter) {
        state
            .rotate(rotation, fc)
            .expect("rotation indices validated by the driver");
    }

    fn restricted_constant(&self, state: &OrthogonalMatrix, i: usize, j: usize) -> f64 {
        let u = state.as_matrix();
        let mut scratch = FlopCounter::new();
        (0..self.dim())
            .filter(|&k| k != i && k != j)
            .map(|k| self.weights[k] * self.quadratic(u, k, k, &mut scratch))
            .sum()
    }
}

/// Any `f(U)` given as a closure, restricted by rotating a copy of `U`.
///
/// `eval_flops` is the declared cost of one call to `f`.
#[derive(Clone)]
pub struct FnObjective<F> {
    f: F,
    eval_flops: u64,
}

impl<F> FnObjective<F>
where
    F: Fn(&DMatrix<f64>) -> f64 + Clone,
{
    pub fn new(f: F, eval_flops: u64) -> Self {
        Self { f, eval_flops }
    }
}

#[derive(Clone)]
pub struct FnRestriction<F> {
    f: F,
    u: DMatrix<f64>,
    i: usize,
    j: usize,
    eval_flops: u64,
}

impl<F> Restriction for FnRestriction<F>
where
    F: Fn(&DMatrix<f64>) -> f64 + Clone,
{
    fn value(&self, theta: f64, fc: &mut FlopCounter) -> f64 {
        let mut rotated = self.u.clone();
        let g = GivensRotation::new_unchecked(self.i, self.j, theta);
        rotate_columns(&mut rotated, &g, fc).expect("pair checked on construction");
        fc.add(self.eval_flops);
        (self.f)(&rotated)
    }
}

impl<F> CoordinateObjective for FnObjective<F>
where
    F: Fn(&DMatrix<f64>) -> f64 + Clone,
{
    type State = OrthogonalMatrix;
    type Restriction = FnRestriction<F>;

    fn coordinates(&self, state: &OrthogonalMatrix) -> usize {
        state.dim()
    }

    fn eval(&self, state: &OrthogonalMatrix, fc: &mut FlopCounter) -> f64 {
        fc.add(self.eval_flops);
        (self.f)(state.as_matrix())
    }

    fn restrict(&self, state: &OrthogonalMatrix, i: usize, j: usize, _fc: &mut FlopCounter) -> FnRestriction<F> {
        assert!(i < j && j < state.dim());
        FnRestriction {
            f: self.f.clone(),
            u: state.as_matrix().clone(),
            i,
            j,
            eval_flops: self.eval_flops,
        }
    }

    fn apply(&self, state: &mut OrthogonalMatrix, rotation: &GivensRotation, fc: &mut FlopCounter) {
        state
            .rotate(rotation, fc)
            .expect("rotation indices validated by the driver");
    }
}
