//! Exact minimization of a 2π-periodic function of one angle.
//!
//! A coarse uniform grid locates the best bracket, golden-section search
//! refines inside it. Values within [`TIE_RELATIVE`] of each other count as
//! equal, and equal minima resolve to the smallest angle in `[−π, π)`.

use std::f64::consts::{PI, TAU};

use crate::{Error, Result};

/// Number of equispaced grid samples over `[−π, π)`.
pub const LINE_SEARCH_GRID: usize = 32;

/// Default refinement tolerance in radians.
pub const LINE_SEARCH_TOL: f64 = 1e-10;

/// Relative band (scaled by the largest grid magnitude) inside which two
/// values are treated as a tie.
pub const TIE_RELATIVE: f64 = 1e-13;

/// Maps an angle into `[−π, π)`. Angles already in range are returned
/// bit-for-bit.
pub fn wrap_angle(theta: f64) -> f64 {
    if (-PI..PI).contains(&theta) {
        return theta;
    }
    let w = (theta + PI).rem_euclid(TAU) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMinimum {
    pub theta: f64,
    pub value: f64,
    /// `g(0)`, which is always one of the grid samples.
    pub value_at_zero: f64,
    pub evaluations: usize,
}

struct Best {
    theta: f64,
    value: f64,
}

impl Best {
    fn offer(&mut self, theta: f64, value: f64, tie: f64) {
        let better = value < self.value - tie;
        let tied_but_earlier = (value - self.value).abs() <= tie && theta < self.theta;
        if better || tied_but_earlier {
            self.theta = theta;
            self.value = value;
        }
    }
}

/// Minimizes `g` over one period.
///
/// The result is never worse than any grid sample, and lies within `tol` of
/// the local minimum of the winning bracket.
pub fn line_minimize_periodic<F>(mut g: F, tol: f64) -> Result<LineMinimum>
where
    F: FnMut(f64) -> f64,
{
    let step = TAU / LINE_SEARCH_GRID as f64;
    let mut eval = |theta: f64| -> Result<f64> {
        let v = g(theta);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { theta })
        }
    };

    let mut grid = [0.0; LINE_SEARCH_GRID];
    for (k, slot) in grid.iter_mut().enumerate() {
        *slot = eval(-PI + k as f64 * step)?;
    }
    let scale = grid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tie = TIE_RELATIVE * scale;

    let mut best_k = 0;
    for k in 1..LINE_SEARCH_GRID {
        if grid[k] < grid[best_k] - tie {
            best_k = k;
        }
    }
    let mut best = Best {
        theta: -PI + best_k as f64 * step,
        value: grid[best_k],
    };
    let mut evaluations = LINE_SEARCH_GRID;

    // golden section on [center − step, center + step], unwrapped
    let center = best.theta;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (center - step, center + step);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = eval(wrap_angle(x1))?;
    let mut f2 = eval(wrap_angle(x2))?;
    evaluations += 2;
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = eval(wrap_angle(x1))?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = eval(wrap_angle(x2))?;
        }
        evaluations += 1;
    }
    let (xr, fr) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    best.offer(wrap_angle(xr), fr, tie);

    Ok(LineMinimum {
        theta: best.theta,
        value: best.value,
        value_at_zero: grid[LINE_SEARCH_GRID / 2],
        evaluations,
    })
}
