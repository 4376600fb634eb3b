use nalgebra::DMatrix;

use crate::manifold::{exact_step, CoordinateObjective, GivensRotation, Restriction, StepOutcome, LINE_SEARCH_TOL};
use crate::{Error, FlopCounter, Result};

/// The product `A·U` being optimized, with the penalty `γ`.
///
/// Also tracks, per column, how many entries exceed `γ` in magnitude; that
/// is the support the loadings will have.
#[derive(Debug, Clone, PartialEq)]
pub struct SpcaState {
    au: DMatrix<f64>,
    gamma: f64,
    above: Vec<usize>,
}

impl SpcaState {
    pub fn new(au: DMatrix<f64>, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::Config(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        let above = au
            .column_iter()
            .map(|c| c.iter().filter(|x| x.abs() > gamma).count())
            .collect();
        Ok(Self { au, gamma, above })
    }

    pub fn au(&self) -> &DMatrix<f64> {
        &self.au
    }

    pub fn into_au(self) -> DMatrix<f64> {
        self.au
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Number of columns `m`.
    pub fn components(&self) -> usize {
        self.au.ncols()
    }

    /// Entries of `A·U` above the threshold, i.e. non-zeros of the loadings.
    pub fn support(&self) -> usize {
        self.above.iter().sum()
    }

    pub(crate) fn column_mut(&mut self, k: usize) -> &mut [f64] {
        let rows = self.au.nrows();
        &mut self.au.as_mut_slice()[k * rows..(k + 1) * rows]
    }

    pub(crate) fn recount(&mut self, k: usize) {
        let gamma = self.gamma;
        self.above[k] = self.au.column(k).iter().filter(|x| x.abs() > gamma).count();
    }

    fn column(&self, k: usize) -> &[f64] {
        let rows = self.au.nrows();
        &self.au.as_slice()[k * rows..(k + 1) * rows]
    }
}

/// `Σ_{j,k} [|AU_kj| − γ]₊²`, charging 3 flops per entry.
pub fn spca_objective(state: &SpcaState, fc: &mut FlopCounter) -> f64 {
    fc.add(3 * state.au.len() as u64);
    thresholded_energy(state.au.as_slice(), state.gamma)
}

#[inline]
fn thresholded_energy(values: &[f64], gamma: f64) -> f64 {
    let mut sum = 0.0;
    for x in values {
        let t = x.abs() - gamma;
        if t > 0.0 {
            sum += t * t;
        }
    }
    sum
}

/// Negated two-column restriction:
///
/// ```text
/// g(θ) = −Σ_k [|c·x_k + s·y_k| − γ]₊² + [|c·y_k − s·x_k| − γ]₊²
/// ```
///
/// One evaluation costs `12d` flops: 6 for the rotated pair of entries and
/// 3 per thresholded square.
#[derive(Debug, Clone)]
pub struct SpcaRestriction {
    ci: Vec<f64>,
    cj: Vec<f64>,
    gamma: f64,
}

impl Restriction for SpcaRestriction {
    fn value(&self, theta: f64, fc: &mut FlopCounter) -> f64 {
        let (s, c) = theta.sin_cos();
        let gamma = self.gamma;
        let mut sum = 0.0;
        for (&x, &y) in self.ci.iter().zip(&self.cj) {
            // same expressions as the column rotation, so the accepted angle
            // reproduces these numbers bit for bit
            let a = c * x + s * y;
            let b = c * y - s * x;
            let ta = a.abs() - gamma;
            if ta > 0.0 {
                sum += ta * ta;
            }
            let tb = b.abs() - gamma;
            if tb > 0.0 {
                sum += tb * tb;
            }
        }
        fc.add(12 * self.ci.len() as u64);
        -sum
    }
}

/// Restriction of the (negated) objective to columns `i < j`.
pub fn spca_coordinate_g(state: &SpcaState, i: usize, j: usize) -> Result<SpcaRestriction> {
    let m = state.components();
    if i >= j || j >= m {
        return Err(Error::InvalidCoordinate { i, j, dim: m });
    }
    Ok(SpcaRestriction {
        ci: state.column(i).to_vec(),
        cj: state.column(j).to_vec(),
        gamma: state.gamma,
    })
}

/// Coordinate problem for the generic driver, phrased as minimization of
/// the negated objective.
#[derive(Debug, Clone, Copy, Default)]
pub struct SpcaObjective;

impl CoordinateObjective for SpcaObjective {
    type State = SpcaState;
    type Restriction = SpcaRestriction;

    fn coordinates(&self, state: &SpcaState) -> usize {
        state.components()
    }

    fn eval(&self, state: &SpcaState, fc: &mut FlopCounter) -> f64 {
        -spca_objective(state, fc)
    }

    fn restrict(&self, state: &SpcaState, i: usize, j: usize, _fc: &mut FlopCounter) -> SpcaRestriction {
        spca_coordinate_g(state, i, j).expect("pair validated by the driver")
    }

    fn apply(&self, state: &mut SpcaState, rotation: &GivensRotation, fc: &mut FlopCounter) {
        crate::manifold::rotate_columns(&mut state.au, rotation, fc).expect("pair validated by the driver");
        state.recount(rotation.i());
        state.recount(rotation.j());
    }

    fn restricted_constant(&self, state: &SpcaState, i: usize, j: usize) -> f64 {
        -(0..state.components())
            .filter(|&k| k != i && k != j)
            .map(|k| thresholded_energy(state.column(k), state.gamma))
            .sum::<f64>()
    }

    fn support(&self, state: &SpcaState) -> Option<usize> {
        Some(state.support())
    }
}

/// One ascent step on the pair `(i, j)`: maximize the two-column objective
/// over `θ` and rotate. Values in the outcome are for the negated objective.
pub fn spca_step(state: &mut SpcaState, i: usize, j: usize, fc: &mut FlopCounter) -> Result<StepOutcome> {
    let r = spca_coordinate_g(state, i, j)?;
    let (theta, after, before) = exact_step(&r, LINE_SEARCH_TOL, fc)?;
    SpcaObjective.apply(state, &GivensRotation::new_unchecked(i, j, theta), fc);
    Ok(StepOutcome {
        i,
        j,
        theta,
        before,
        after,
        derivative: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{make_givens, rotate_columns, seeded_rng};
    use rand::Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_state(d: usize, m: usize, gamma: f64, seed: u64) -> SpcaState {
        let mut rng = seeded_rng(seed);
        SpcaState::new(DMatrix::from_fn(d, m, |_, _| rng.random_range(-1.0..1.0)), gamma).unwrap()
    }

    #[test]
    fn objective_without_penalty_is_frobenius() {
        let s = random_state(5, 4, 0.0, 1);
        let mut fc = FlopCounter::new();
        assert!((spca_objective(&s, &mut fc) - s.au().norm_squared()).abs() < 1e-12);
        assert_eq!(fc.count(), 60);
    }

    #[test]
    fn objective_vanishes_under_full_truncation() {
        let s = random_state(5, 4, 0.0, 2);
        let big = s.au().abs().max();
        let s = SpcaState::new(s.into_au(), big).unwrap();
        assert_eq!(spca_objective(&s, &mut FlopCounter::new()), 0.0);
        assert_eq!(s.support(), 0);
    }

    #[test]
    fn objective_hand_example() {
        let s = SpcaState::new(DMatrix::from_column_slice(2, 1, &[2.0, -1.0]), 0.5).unwrap();
        assert_eq!(spca_objective(&s, &mut FlopCounter::new()), 2.5);
    }

    #[test]
    fn negative_gamma_rejected() {
        assert!(SpcaState::new(DMatrix::zeros(2, 2), -0.1).is_err());
    }

    #[test]
    fn restriction_at_zero_is_the_two_column_contribution() {
        let s = random_state(6, 4, 0.3, 3);
        let r = spca_coordinate_g(&s, 1, 3).unwrap();
        let mut pair = DMatrix::zeros(6, 2);
        pair.set_column(0, &s.au().column(1));
        pair.set_column(1, &s.au().column(3));
        let two = SpcaState::new(pair, 0.3).unwrap();
        assert_eq!(r.value(0.0, &mut FlopCounter::new()), -spca_objective(&two, &mut FlopCounter::new()));
    }

    #[test]
    fn quarter_turn_symmetry() {
        // θ + π/2 swaps the columns and flips one sign; the thresholded sum is unchanged
        let s = random_state(7, 3, 0.2, 4);
        let r = spca_coordinate_g(&s, 0, 2).unwrap();
        let mut rng = seeded_rng(5);
        for _ in 0..50 {
            let t = rng.random_range(-PI..PI);
            let a = r.value(t, &mut FlopCounter::new());
            let b = r.value(t + FRAC_PI_2, &mut FlopCounter::new());
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn restriction_matches_rotate_then_evaluate() {
        let s = random_state(6, 5, 0.25, 6);
        let obj = SpcaObjective;
        let mut rng = seeded_rng(7);
        for _ in 0..100 {
            let i = rng.random_range(0..4);
            let j = rng.random_range(i + 1..5);
            let t = rng.random_range(-PI..PI);
            let r = spca_coordinate_g(&s, i, j).unwrap();
            let mut au = s.au().clone();
            rotate_columns(&mut au, &make_givens(i, j, t, 5).unwrap(), &mut FlopCounter::new()).unwrap();
            let rotated = SpcaState::new(au, 0.25).unwrap();
            let full = spca_objective(&rotated, &mut FlopCounter::new());
            let g = r.value(t, &mut FlopCounter::new());
            // the constant is θ-independent: untouched columns only
            let lhs = g + obj.restricted_constant(&s, i, j);
            assert!((lhs + full).abs() < 1e-12, "{lhs} vs {}", -full);
        }
    }

    #[test]
    fn evaluation_cost_is_twelve_per_row() {
        let s = random_state(9, 3, 0.1, 8);
        let r = spca_coordinate_g(&s, 0, 1).unwrap();
        let mut fc = FlopCounter::new();
        r.value(0.4, &mut fc);
        assert_eq!(fc.count(), 108);
    }

    #[test]
    fn zero_penalty_step_ties_to_minus_pi() {
        let mut s = random_state(6, 4, 0.0, 9);
        let before = spca_objective(&s, &mut FlopCounter::new());
        let out = spca_step(&mut s, 0, 2, &mut FlopCounter::new()).unwrap();
        assert_eq!(out.theta, -PI);
        assert!((spca_objective(&s, &mut FlopCounter::new()) - before).abs() < 1e-10);
    }

    #[test]
    fn empty_column_pairs_with_strong_column_at_zero() {
        // column 1 is empty; any rotation leaks mass of column 0 under the threshold
        let au = DMatrix::from_column_slice(3, 2, &[2.0, -1.5, 1.2, 0.0, 0.0, 0.0]);
        let gamma = 0.5;
        let mut s = SpcaState::new(au, gamma).unwrap();
        let r = spca_coordinate_g(&s, 0, 1).unwrap();
        let n = 200_000;
        let (mut best_t, mut best) = (0.0, f64::INFINITY);
        for k in 0..n {
            let t = -PI + 2.0 * PI * k as f64 / n as f64;
            let v = r.value(t, &mut FlopCounter::new());
            if v < best - 1e-15 {
                best = v;
                best_t = t;
            }
        }
        // brute grid: the optimum value is attained at θ ∈ {−π, −π/2, 0, π/2}
        assert!((best - r.value(0.0, &mut FlopCounter::new())).abs() < 1e-12);
        assert!([-PI, -FRAC_PI_2, 0.0, FRAC_PI_2].iter().any(|&t| (best_t - t).abs() < 1e-9));
        let out = spca_step(&mut s, 0, 1, &mut FlopCounter::new()).unwrap();
        assert!((out.after - best).abs() < 1e-12);
    }

    #[test]
    fn step_never_decreases_objective() {
        let mut rng = seeded_rng(10);
        for seed in 0..40 {
            let mut s = random_state(8, 5, 0.3, seed);
            let i = rng.random_range(0..4);
            let j = rng.random_range(i + 1..5);
            let before = spca_objective(&s, &mut FlopCounter::new());
            spca_step(&mut s, i, j, &mut FlopCounter::new()).unwrap();
            assert!(spca_objective(&s, &mut FlopCounter::new()) >= before - 1e-12);
        }
    }

    #[test]
    fn support_count_tracks_rotations() {
        let mut s = random_state(10, 4, 0.4, 11);
        for (i, j) in [(0, 1), (2, 3), (1, 3)] {
            spca_step(&mut s, i, j, &mut FlopCounter::new()).unwrap();
            let direct = s.au().iter().filter(|x| x.abs() > 0.4).count();
            assert_eq!(s.support(), direct);
        }
    }
}
