use nalgebra::DMatrix;
use std::f64::consts::{PI, TAU};

use super::{trilinear_unchecked, SymmetricTensor3};
use crate::manifold::{wrap_angle, OrthogonalMatrix, TIE_RELATIVE};
use crate::{Error, FlopCounter, Result};

/// The four contractions a pair `(i, j)` depends on:
/// `T(u_i,u_i,u_i)`, `T(u_j,u_j,u_j)`, `T(u_i,u_j,u_j)`, `T(u_j,u_i,u_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerms {
    pub iii: f64,
    pub jjj: f64,
    pub ijj: f64,
    pub jii: f64,
}

impl PairTerms {
    /// Diagonal terms after rotating the pair by `(cos, sin)`.
    pub(crate) fn rotated_diagonal(&self, c: f64, s: f64) -> (f64, f64) {
        let (a, b, p, q) = (self.iii, self.jjj, self.ijj, self.jii);
        let (c2, s2) = (c * c, s * s);
        let new_i = c2 * c * a + 3.0 * c2 * s * q + 3.0 * c * s2 * p + s2 * s * b;
        let new_j = c2 * c * b - 3.0 * c2 * s * p + 3.0 * c * s2 * q - s2 * s * a;
        (new_i, new_j)
    }
}

/// Objective restricted to one pair:
///
/// ```text
/// f(U·G(i,j,θ)) = c3·cos³θ + s3·sin³θ + c1·cosθ + s1·sinθ + constant
/// ```
///
/// With `a = T̃_iii, b = T̃_jjj, p = T̃_ijj, q = T̃_jii`:
/// `c3 = a + b − 3(p + q)`, `s3 = b − a + 3(p − q)`, `c1 = 3(p + q)`,
/// `s1 = 3(q − p)`. `constant` is `Σ_{k≠i,j} T̃_kkk`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestrictedCoeffs {
    pub c3: f64,
    pub s3: f64,
    pub c1: f64,
    pub s1: f64,
    pub constant: f64,
}

impl RestrictedCoeffs {
    pub fn from_terms(t: &PairTerms, constant: f64) -> Self {
        let (a, b, p, q) = (t.iii, t.jjj, t.ijj, t.jii);
        Self {
            c3: a + b - 3.0 * (p + q),
            s3: b - a + 3.0 * (p - q),
            c1: 3.0 * (p + q),
            s1: 3.0 * (q - p),
            constant,
        }
    }

    /// `g(θ)` without the constant.
    #[inline]
    pub fn g(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        (self.c3 * c * c + self.c1) * c + (self.s3 * s * s + self.s1) * s
    }

    /// `g(θ) + constant`: the full objective after the rotation.
    pub fn total(&self, theta: f64) -> f64 {
        self.g(theta) + self.constant
    }

    /// `g′(0) = s1`.
    pub fn derivative_at_zero(&self) -> f64 {
        self.s1
    }

    fn is_zero(&self) -> bool {
        self.c3 == 0.0 && self.s3 == 0.0 && self.c1 == 0.0 && self.s1 == 0.0
    }

    /// `g` in multiple-angle form: `A1 cosθ + B1 sinθ + A3 cos3θ + B3 sin3θ`.
    fn harmonics(&self) -> [f64; 4] {
        [
            0.75 * self.c3 + self.c1,
            0.75 * self.s3 + self.s1,
            0.25 * self.c3,
            -0.25 * self.s3,
        ]
    }
}

/// Builds the coefficients for pair `i < j` straight from `T` and `U`:
/// four contractions plus the diagonal terms of every other column.
pub fn contract_pair(
    t: &SymmetricTensor3,
    u: &OrthogonalMatrix,
    i: usize,
    j: usize,
    fc: &mut FlopCounter,
) -> Result<RestrictedCoeffs> {
    let d = t.dim();
    if u.dim() != d {
        return Err(Error::LengthMismatch(u.dim(), d));
    }
    if i >= j || j >= d {
        return Err(Error::InvalidCoordinate { i, j, dim: d });
    }
    let m = u.as_matrix();
    let terms = pair_terms(t, m.column(i).as_slice(), m.column(j).as_slice(), fc);
    let mut constant = 0.0;
    for k in (0..d).filter(|&k| k != i && k != j) {
        let col = m.column(k);
        constant += trilinear_unchecked(t, col.as_slice(), col.as_slice(), col.as_slice());
        fc.add((2 * d * d * d + 2 * d * d + 2 * d + 1) as u64);
    }
    Ok(RestrictedCoeffs::from_terms(&terms, constant))
}

/// The four pair contractions from two partial contractions
/// `T(u_i, u_i, ·)` and `T(u_j, u_j, ·)`: `2(2d³ + 2d² + 4d)` flops.
pub(crate) fn pair_terms(t: &SymmetricTensor3, ui: &[f64], uj: &[f64], fc: &mut FlopCounter) -> PairTerms {
    let d = t.dim();
    let vi = partial(t, ui);
    let vj = partial(t, uj);
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    fc.add((2 * (2 * d * d * d + 2 * d * d + 4 * d)) as u64);
    PairTerms {
        iii: dot(&vi, ui),
        jjj: dot(&vj, uj),
        ijj: dot(&vj, ui),
        jii: dot(&vi, uj),
    }
}

/// `x ↦ T(x, x, ·)`.
fn partial(t: &SymmetricTensor3, x: &[f64]) -> Vec<f64> {
    let d = t.dim();
    let vals = t.as_slice();
    let mut out = vec![0.0; d];
    for (a, &xa) in x.iter().enumerate() {
        for (b, &xb) in x.iter().enumerate() {
            let w = xa * xb;
            let fiber = &vals[(a * d + b) * d..(a * d + b + 1) * d];
            for (o, f) in out.iter_mut().zip(fiber) {
                *o += w * f;
            }
        }
    }
    out
}

const GRID_POINTS: usize = 1024;
const NEWTON_STEPS: usize = 8;

/// Global maximizer of `g` over `[−π, π)`.
///
/// Critical points are the real roots of `g′` after the substitution
/// `t = tan(θ/2)`, which turns `(1 + t²)³·g′` into a polynomial of degree at
/// most 6; its roots come from the companion-matrix eigenvalues. The
/// substitution misses `θ = π`, so `−π` is always a candidate. Every
/// candidate is Newton-polished, and a 1024-point grid guards against a
/// badly conditioned root solve.
///
/// Ties within the relative band prefer the smallest `|θ|`, so a flat
/// function or an already-optimal pair stays put.
/// All-zero coefficients give `θ = 0`.
pub fn maximize_g(coeffs: &RestrictedCoeffs, fc: &mut FlopCounter) -> f64 {
    if coeffs.is_zero() {
        return 0.0;
    }
    let (c3, s3, c1, s1) = (coeffs.c3, coeffs.s3, coeffs.c1, coeffs.s1);
    let poly = [
        s1,
        -6.0 * c3 - 2.0 * c1,
        12.0 * s3 + s1,
        12.0 * c3 - 4.0 * c1,
        -12.0 * s3 - s1,
        -6.0 * c3 - 2.0 * c1,
        -s1,
    ];
    let h = coeffs.harmonics();
    let mut candidates = vec![0.0, -PI];
    let at_zero = coeffs.g(0.0);
    for t in real_parts_of_roots(&poly, fc) {
        candidates.push(2.0 * t.atan());
    }
    let step = TAU / GRID_POINTS as f64;
    let mut grid_best = (f64::NEG_INFINITY, 0.0);
    for k in 0..GRID_POINTS {
        let theta = -PI + k as f64 * step;
        let v = coeffs.g(theta);
        if v > grid_best.0 {
            grid_best = (v, theta);
        }
    }
    fc.add(11 * GRID_POINTS as u64);
    candidates.push(grid_best.1);

    let mut scored: Vec<(f64, f64)> = Vec::with_capacity(candidates.len());
    for theta in candidates {
        let raw = wrap_angle(theta);
        let v_raw = coeffs.g(raw);
        let polished = newton_polish(&h, raw);
        let v_pol = coeffs.g(polished);
        // near a maximum the values agree to rounding; trust the polished
        // critical point unless it is clearly worse
        let tie = TIE_RELATIVE * v_raw.abs().max(v_pol.abs());
        scored.push(if v_pol >= v_raw - tie { (polished, v_pol) } else { (raw, v_raw) });
    }
    fc.add((scored.len() * (22 + 30 * NEWTON_STEPS)) as u64);

    let best = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let tie = TIE_RELATIVE * best.abs().max(at_zero.abs());
    // among (near-)ties prefer the smallest move, then the smallest angle
    scored
        .iter()
        .filter(|s| s.1 >= best - tie)
        .map(|s| s.0)
        .min_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)))
        .unwrap_or(0.0)
}

/// Newton iterations on `g′ = 0` in harmonic form; returns `θ` unchanged if
/// the iteration leaves the neighbourhood or stops making sense.
fn newton_polish(h: &[f64; 4], theta: f64) -> f64 {
    let [a1, b1, a3, b3] = *h;
    let mut x = theta;
    for _ in 0..NEWTON_STEPS {
        let (s, c) = x.sin_cos();
        let (s3, c3) = (3.0 * x).sin_cos();
        let d1 = -a1 * s + b1 * c - 3.0 * a3 * s3 + 3.0 * b3 * c3;
        let d2 = -a1 * c - b1 * s - 9.0 * a3 * c3 - 9.0 * b3 * s3;
        if d2 == 0.0 || !d2.is_finite() {
            break;
        }
        let dx = d1 / d2;
        if !dx.is_finite() || dx.abs() > 0.5 {
            return theta;
        }
        x -= dx;
        if dx.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    wrap_angle(x)
}

/// Real parts of the roots of `Σ p_k t^k` (ascending coefficients).
fn real_parts_of_roots(poly: &[f64], fc: &mut FlopCounter) -> Vec<f64> {
    let scale = poly.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let mut deg = poly.len() - 1;
    while deg > 0 && poly[deg].abs() <= 1e-14 * scale {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let lead = poly[deg];
    let mut companion = DMatrix::zeros(deg, deg);
    for r in 1..deg {
        companion[(r, r - 1)] = 1.0;
    }
    for r in 0..deg {
        companion[(r, deg - 1)] = -poly[r] / lead;
    }
    // dense eigen solve on at most 6×6; charged as ~10n³
    fc.add((10 * deg * deg * deg) as u64);
    let Some(schur) = nalgebra::Schur::try_new(companion, 1e-15, 10_000) else {
        return Vec::new();
    };
    schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .filter(|t| t.is_finite())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{random_orthogonal, seeded_rng, GivensRotation};
    use crate::tensor::{tensor_objective, tests::random_symmetric};
    use rand::Rng;
    use std::f64::consts::FRAC_PI_2;

    fn coeffs(c3: f64, s3: f64, c1: f64, s1: f64) -> RestrictedCoeffs {
        RestrictedCoeffs { c3, s3, c1, s1, constant: 0.0 }
    }

    #[test]
    fn pure_cosine_cube_peaks_at_zero() {
        assert_eq!(maximize_g(&coeffs(1.0, 0.0, 0.0, 0.0), &mut FlopCounter::new()), 0.0);
    }

    #[test]
    fn pure_sine_peaks_at_quarter_turn() {
        let t = maximize_g(&coeffs(0.0, 0.0, 0.0, 1.0), &mut FlopCounter::new());
        assert!((t - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn zero_coefficients_stay_put() {
        assert_eq!(maximize_g(&coeffs(0.0, 0.0, 0.0, 0.0), &mut FlopCounter::new()), 0.0);
    }

    #[test]
    fn minus_cosine_peaks_at_minus_pi() {
        let t = maximize_g(&coeffs(0.0, 0.0, -1.0, 0.0), &mut FlopCounter::new());
        assert_eq!(t, -PI);
    }

    #[test]
    fn matches_dense_grid() {
        let mut rng = seeded_rng(11);
        let n = 10_000_000usize;
        for _ in 0..8 {
            let c = coeffs(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let theta = maximize_g(&c, &mut FlopCounter::new());
            let step = TAU / n as f64;
            let brute = (0..n).map(|k| c.g(-PI + k as f64 * step)).fold(f64::NEG_INFINITY, f64::max);
            assert!(c.g(theta) >= brute - 1e-8, "{} vs {brute}", c.g(theta));
        }
    }

    #[test]
    fn diagonal_tensor_at_identity_is_critical() {
        let t = SymmetricTensor3::diagonal(&[1.0, 2.0, 3.0]);
        let c = contract_pair(&t, &OrthogonalMatrix::identity(3), 0, 2, &mut FlopCounter::new()).unwrap();
        assert_eq!((c.c1, c.s1), (0.0, 0.0));
        assert_eq!(c.constant, 2.0);
        assert_eq!(c.derivative_at_zero(), 0.0);
    }

    #[test]
    fn coefficients_reproduce_rotated_objective() {
        let d = 4;
        let t = random_symmetric(d, 12);
        let u = random_orthogonal(d, 13).unwrap();
        let mut rng = seeded_rng(14);
        for (i, j) in [(0, 1), (1, 3), (0, 3)] {
            let c = contract_pair(&t, &u, i, j, &mut FlopCounter::new()).unwrap();
            assert!((c.total(0.0) - tensor_objective(&t, &u, &mut FlopCounter::new()).unwrap()).abs() < 1e-10);
            for _ in 0..100 {
                let theta = rng.random_range(-PI..PI);
                let mut rotated = u.clone();
                rotated
                    .rotate(&GivensRotation::new_unchecked(i, j, theta), &mut FlopCounter::new())
                    .unwrap();
                let direct = tensor_objective(&t, &rotated, &mut FlopCounter::new()).unwrap();
                assert!((c.g(theta) - (direct - c.constant)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn swapping_the_pair_mirrors_the_angle() {
        let mut rng = seeded_rng(15);
        let terms = PairTerms {
            iii: rng.random_range(-1.0..1.0),
            jjj: rng.random_range(-1.0..1.0),
            ijj: rng.random_range(-1.0..1.0),
            jii: rng.random_range(-1.0..1.0),
        };
        let swapped = PairTerms {
            iii: terms.jjj,
            jjj: terms.iii,
            ijj: terms.jii,
            jii: terms.ijj,
        };
        let a = RestrictedCoeffs::from_terms(&terms, 0.0);
        let b = RestrictedCoeffs::from_terms(&swapped, 0.0);
        assert_eq!((b.c3, b.c1), (a.c3, a.c1));
        assert_eq!((b.s3, b.s1), (-a.s3, -a.s1));
        for k in 0..20 {
            let theta = -3.0 + 0.3 * k as f64;
            assert!((a.g(theta) - b.g(-theta)).abs() < 1e-14);
        }
    }

    #[test]
    fn rotated_diagonal_matches_recontraction() {
        let d = 5;
        let t = random_symmetric(d, 16);
        let u = random_orthogonal(d, 17).unwrap();
        let m = u.as_matrix();
        let terms = pair_terms(&t, m.column(1).as_slice(), m.column(3).as_slice(), &mut FlopCounter::new());
        let theta = 0.7;
        let mut r = u.clone();
        r.rotate(&GivensRotation::new_unchecked(1, 3, theta), &mut FlopCounter::new()).unwrap();
        let (ni, nj) = terms.rotated_diagonal(theta.cos(), theta.sin());
        let c1 = r.as_matrix().column(1);
        let c3 = r.as_matrix().column(3);
        assert!((ni - trilinear_unchecked(&t, c1.as_slice(), c1.as_slice(), c1.as_slice())).abs() < 1e-13);
        assert!((nj - trilinear_unchecked(&t, c3.as_slice(), c3.as_slice(), c3.as_slice())).abs() < 1e-13);
    }
}
