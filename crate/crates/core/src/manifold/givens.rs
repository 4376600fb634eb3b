use nalgebra::DMatrix;

use super::linesearch::wrap_angle;
use crate::{Error, FlopCounter, Result};

/// The plane rotation `G(i, j, θ)`, with `i < j` (0-based) and `θ ∈ [−π, π)`.
///
/// Right-multiplication rotates columns `i` and `j`:
///
/// ```text
/// new_i =  cos θ · old_i + sin θ · old_j
/// new_j = −sin θ · old_i + cos θ · old_j
/// ```
///
/// so the dense form carries `cos θ` at `(i,i)` and `(j,j)`, `sin θ` at
/// `(j,i)` and `−sin θ` at `(i,j)`. This equals `Expm(−θ·H_ij)` with
/// `H_ij = e_i e_jᵀ − e_j e_iᵀ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GivensRotation {
    i: usize,
    j: usize,
    theta: f64,
    cos: f64,
    sin: f64,
}

/// Builds `G(i, j, θ)` for dimension `d`; `θ` is wrapped into `[−π, π)`.
pub fn make_givens(i: usize, j: usize, theta: f64, d: usize) -> Result<GivensRotation> {
    if i >= j || j >= d {
        return Err(Error::InvalidCoordinate { i, j, dim: d });
    }
    if !theta.is_finite() {
        return Err(Error::NonFinite { theta });
    }
    Ok(GivensRotation::new_unchecked(i, j, wrap_angle(theta)))
}

impl GivensRotation {
    pub(crate) fn new_unchecked(i: usize, j: usize, theta: f64) -> Self {
        let (sin, cos) = theta.sin_cos();
        Self {
            i,
            j,
            theta,
            cos,
            sin,
        }
    }

    pub fn i(&self) -> usize {
        self.i
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn cos(&self) -> f64 {
        self.cos
    }

    pub fn sin(&self) -> f64 {
        self.sin
    }

    /// Dense `d×d` form. Meant for tests and diagnostics.
    pub fn dense(&self, d: usize) -> DMatrix<f64> {
        let mut g = DMatrix::identity(d, d);
        g[(self.i, self.i)] = self.cos;
        g[(self.j, self.j)] = self.cos;
        g[(self.j, self.i)] = self.sin;
        g[(self.i, self.j)] = -self.sin;
        g
    }
}

/// Rotates two equal-length column slices in place; `6·len` flops.
#[inline]
pub fn rotate_slices(ci: &mut [f64], cj: &mut [f64], cos: f64, sin: f64) {
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let a = *x;
        let b = *y;
        *x = cos * a + sin * b;
        *y = cos * b - sin * a;
    }
}

/// `M ← M·G(i, j, θ)`: only columns `i` and `j` change. Adds exactly
/// `6·rows` to `fc`.
pub fn rotate_columns(m: &mut DMatrix<f64>, g: &GivensRotation, fc: &mut FlopCounter) -> Result<()> {
    let (rows, cols) = m.shape();
    if g.j >= cols {
        return Err(Error::Shape(format!(
            "rotation on columns ({}, {}) of a {}x{} matrix",
            g.i, g.j, rows, cols
        )));
    }
    let data = m.as_mut_slice();
    let (head, tail) = data.split_at_mut(g.j * rows);
    let ci = &mut head[g.i * rows..(g.i + 1) * rows];
    let cj = &mut tail[..rows];
    rotate_slices(ci, cj, g.cos, g.sin);
    fc.add(6 * rows as u64);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{orthogonality_defect, random_orthogonal, seeded_rng};
    use rand::Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    /// Truncated power series of `exp(X)`; independent of the rotation code.
    fn expm_series(x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = x.nrows();
        let mut term = DMatrix::identity(n, n);
        let mut sum = term.clone();
        for k in 1..60 {
            term = &term * x / k as f64;
            sum += &term;
        }
        sum
    }

    fn basis(i: usize, j: usize, d: usize) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(d, d);
        h[(i, j)] = 1.0;
        h[(j, i)] = -1.0;
        h
    }

    #[test]
    fn zero_angle_is_identity() {
        let g = make_givens(0, 1, 0.0, 3).unwrap();
        assert_eq!(g.dense(3), DMatrix::identity(3, 3));
    }

    #[test]
    fn rejects_bad_pairs() {
        assert!(matches!(make_givens(1, 1, 0.1, 3), Err(Error::InvalidCoordinate { .. })));
        assert!(matches!(make_givens(2, 1, 0.1, 3), Err(Error::InvalidCoordinate { .. })));
        assert!(matches!(make_givens(0, 3, 0.1, 3), Err(Error::InvalidCoordinate { .. })));
        assert!(matches!(make_givens(0, 1, f64::NAN, 3), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn matches_displayed_expm_of_negative_basis() {
        // the displayed Expm(−ηH_ij): cos at (i,i),(j,j), −sin at (i,j), sin at (j,i)
        let eta = 0.7;
        let g = make_givens(1, 3, eta, 5).unwrap().dense(5);
        assert_eq!(g[(1, 1)], eta.cos());
        assert_eq!(g[(3, 3)], eta.cos());
        assert_eq!(g[(1, 3)], -eta.sin());
        assert_eq!(g[(3, 1)], eta.sin());
        let oracle = expm_series(&(basis(1, 3, 5) * -eta));
        assert!((g - oracle).abs().max() < 1e-14);
    }

    #[test]
    fn quarter_turn_in_two_dimensions() {
        let g = make_givens(0, 1, FRAC_PI_2, 2).unwrap().dense(2);
        let oracle = expm_series(&(basis(0, 1, 2) * -FRAC_PI_2));
        assert!((&g - &oracle).abs().max() < 1e-14);
        assert!((g.determinant() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn geodesic_consistency_over_random_angles() {
        let mut rng = seeded_rng(7);
        for _ in 0..200 {
            let d = rng.random_range(2..7);
            let i = rng.random_range(0..d - 1);
            let j = rng.random_range(i + 1..d);
            let theta = rng.random_range(-PI..PI);
            let g = make_givens(i, j, theta, d).unwrap().dense(d);
            let oracle = expm_series(&(basis(i, j, d) * -theta));
            assert!((&g - oracle).abs().max() < 1e-12);
            assert!((g.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn wraps_theta_into_half_open_period() {
        assert_eq!(make_givens(0, 1, PI, 2).unwrap().theta(), -PI);
        let g = make_givens(0, 1, 3.0 * PI / 2.0, 2).unwrap();
        assert!((g.theta() + FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn zero_angle_rotation_still_costs_six_per_row() {
        let mut m = DMatrix::from_fn(4, 3, |r, c| (r * 3 + c) as f64);
        let before = m.clone();
        let mut fc = FlopCounter::new();
        rotate_columns(&mut m, &make_givens(0, 2, 0.0, 3).unwrap(), &mut fc).unwrap();
        assert_eq!(m, before);
        assert_eq!(fc.count(), 24);
    }

    #[test]
    fn matches_dense_product() {
        let mut rng = seeded_rng(3);
        let m = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        for (i, j) in [(0, 1), (1, 4), (2, 3)] {
            let g = make_givens(i, j, 0.3, 5).unwrap();
            let mut rotated = m.clone();
            let mut fc = FlopCounter::new();
            rotate_columns(&mut rotated, &g, &mut fc).unwrap();
            let dense = &m * g.dense(5);
            assert!((&rotated - dense).abs().max() < 1e-15);
            for c in (0..5).filter(|&c| c != i && c != j) {
                assert_eq!(rotated.column(c), m.column(c));
            }
            assert_eq!(fc.count(), 30);
        }
    }

    #[test]
    fn shape_error_on_narrow_matrix() {
        let mut m = DMatrix::zeros(3, 2);
        let g = make_givens(0, 2, 0.1, 3).unwrap();
        assert!(matches!(
            rotate_columns(&mut m, &g, &mut FlopCounter::new()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn rotation_preserves_orthogonality_per_step() {
        let mut rng = seeded_rng(11);
        let d = 20;
        let mut u = random_orthogonal(d, 5).unwrap().into_matrix();
        let mut fc = FlopCounter::new();
        for _ in 0..2000 {
            let before = orthogonality_defect(&u);
            let i = rng.random_range(0..d - 1);
            let j = rng.random_range(i + 1..d);
            let g = make_givens(i, j, rng.random_range(-PI..PI), d).unwrap();
            rotate_columns(&mut u, &g, &mut fc).unwrap();
            assert!(orthogonality_defect(&u) <= before + 1e-13 * d as f64);
        }
    }
}
