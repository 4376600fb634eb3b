use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::GmmModel;
use crate::manifold::{random_orthogonal, DescentConfig, DescentTrace, OrthogonalMatrix};
use crate::tensor::{
    decomposition_residual, default_tensor_stop, multilinear, tensor_decompose, Decomposition, SymmetricTensor3,
    TensorMode, NULL_TOLERANCE,
};
use crate::{Error, FlopCounter, Result};

/// Eigenvalues of `M2` at or below this (relative to `max(1, λ_max)`) count as zero.
pub const EIGEN_TOLERANCE: f64 = 1e-10;

/// Corrected moments of a spherical mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimates {
    pub m1: DVector<f64>,
    /// `E[xxᵀ] − σ̂²·I`.
    pub m2: DMatrix<f64>,
    /// `E[x⊗x⊗x] − σ̂²·Σ_a (m1⊗e_a⊗e_a + e_a⊗m1⊗e_a + e_a⊗e_a⊗m1)`.
    pub m3: SymmetricTensor3,
    /// Smallest eigenvalue of the covariance.
    pub sigma2_hat: f64,
    /// Set when the covariance is numerically not positive semidefinite.
    pub conditioning_warning: bool,
}

/// Uncorrected `E[x]`, `E[xxᵀ]`, `E[x⊗x⊗x]` (packed over `a ≤ b ≤ c`).
struct RawMoments {
    e1: DVector<f64>,
    e2: DMatrix<f64>,
    e3: Vec<f64>,
}

fn packed_len(d: usize) -> usize {
    d * (d + 1) * (d + 2) / 6
}

/// Empirical moments of the columns of `points` (`D×n`) for a `k`-component fit.
pub fn estimate_moments(points: &DMatrix<f64>, k: usize) -> Result<MomentEstimates> {
    let (d, n) = points.shape();
    if k == 0 || k > d {
        return Err(Error::Config(format!("need 1 <= k <= D, got k = {k}, D = {d}")));
    }
    if n <= d {
        return Err(Error::InsufficientData { needed: d + 1, available: n });
    }
    let mut e1 = DVector::zeros(d);
    let mut e2 = DMatrix::zeros(d, d);
    let mut e3 = vec![0.0; packed_len(d)];
    for x in points.column_iter() {
        let x = x.as_slice();
        let mut idx = 0;
        for a in 0..d {
            let xa = x[a];
            e1[a] += xa;
            for b in a..d {
                let xab = xa * x[b];
                e2[(a, b)] += xab;
                for &xc in &x[b..] {
                    e3[idx] += xab * xc;
                    idx += 1;
                }
            }
        }
    }
    let inv = 1.0 / n as f64;
    e1 *= inv;
    for a in 0..d {
        for b in a..d {
            let v = e2[(a, b)] * inv;
            e2[(a, b)] = v;
            e2[(b, a)] = v;
        }
    }
    e3.iter_mut().for_each(|v| *v *= inv);
    Ok(correct(RawMoments { e1, e2, e3 }))
}

/// Exact moments of `model`, corrected the same way as the empirical ones.
pub fn population_moments(model: &GmmModel) -> MomentEstimates {
    let d = model.dim();
    let means = model.means();
    let s2 = model.sigma2();
    let e1 = means * DVector::from_column_slice(model.weights());
    let mut e2 = DMatrix::identity(d, d) * s2;
    let mut e3 = vec![0.0; packed_len(d)];
    for (i, &w) in model.weights().iter().enumerate() {
        let mu = means.column(i);
        e2 += w * mu * mu.transpose();
        let mut idx = 0;
        for a in 0..d {
            for b in a..d {
                for c in b..d {
                    e3[idx] += w * mu[a] * mu[b] * mu[c];
                    idx += 1;
                }
            }
        }
    }
    // Gaussian noise adds σ²·(m1_a δ_bc + m1_b δ_ac + m1_c δ_ab)
    let mut idx = 0;
    for a in 0..d {
        for b in a..d {
            for c in b..d {
                e3[idx] += s2 * delta_sum(&e1, a, b, c);
                idx += 1;
            }
        }
    }
    correct(RawMoments { e1, e2, e3 })
}

#[inline]
fn delta_sum(m1: &DVector<f64>, a: usize, b: usize, c: usize) -> f64 {
    let mut s = 0.0;
    if b == c {
        s += m1[a];
    }
    if a == c {
        s += m1[b];
    }
    if a == b {
        s += m1[c];
    }
    s
}

fn correct(raw: RawMoments) -> MomentEstimates {
    let d = raw.e1.len();
    let cov = &raw.e2 - &raw.e1 * raw.e1.transpose();
    let eig = cov.symmetric_eigenvalues();
    let sigma2_hat = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = eig.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let conditioning_warning = sigma2_hat < -EIGEN_TOLERANCE * scale;
    let m2 = &raw.e2 - DMatrix::identity(d, d) * sigma2_hat;
    let mut m3 = vec![0.0; d * d * d];
    let mut idx = 0;
    for a in 0..d {
        for b in a..d {
            for c in b..d {
                let v = raw.e3[idx] - sigma2_hat * delta_sum(&raw.e1, a, b, c);
                idx += 1;
                for (p, q, r) in [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                    m3[(p * d + q) * d + r] = v;
                }
            }
        }
    }
    MomentEstimates {
        m1: raw.e1,
        m2,
        m3: SymmetricTensor3::new(d, m3).expect("filled from a packed symmetric array"),
        sigma2_hat,
        conditioning_warning,
    }
}

/// Whitening map for the top-`k` eigenspace of `M2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Whitening {
    /// `W = U_k D_k^{−1/2}`, so `Wᵀ·M2·W = I_k`.
    pub w: DMatrix<f64>,
    /// `B = U_k D_k^{1/2}`, the map back.
    pub b: DMatrix<f64>,
    /// Top-`k` eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
}

/// Top-`k` eigendecomposition of the symmetric `m2`. Eigenvectors are signed
/// so that their largest-magnitude entry is positive.
pub fn whiten(m2: &DMatrix<f64>, k: usize) -> Result<Whitening> {
    let d = m2.nrows();
    if !m2.is_square() || k == 0 || k > d {
        return Err(Error::Shape(format!("cannot whiten a {}x{} matrix to rank {k}", m2.nrows(), m2.ncols())));
    }
    let eig = SymmetricEigen::new(m2.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let top = eig.eigenvalues[order[0]];
    let tolerance = EIGEN_TOLERANCE * top.abs().max(1.0);
    let found = order.iter().filter(|&&i| eig.eigenvalues[i] > tolerance).count();
    if found < k {
        return Err(Error::RankDeficient {
            needed: k,
            found,
            tolerance,
            gap: eig.eigenvalues[order[k - 1]],
        });
    }
    let mut w = DMatrix::zeros(d, k);
    let mut b = DMatrix::zeros(d, k);
    let mut eigenvalues = Vec::with_capacity(k);
    for (col, &i) in order.iter().take(k).enumerate() {
        let lambda = eig.eigenvalues[i];
        let mut v = eig.eigenvectors.column(i).into_owned();
        let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if pivot < 0.0 {
            v.neg_mut();
        }
        w.set_column(col, &(&v / lambda.sqrt()));
        b.set_column(col, &(&v * lambda.sqrt()));
        eigenvalues.push(lambda);
    }
    Ok(Whitening { w, b, eigenvalues })
}

/// `T_abc = Σ_pqr M3_pqr W_pa W_qb W_rc`, symmetrized.
pub fn whiten_tensor(m3: &SymmetricTensor3, w: &DMatrix<f64>, fc: &mut FlopCounter) -> Result<SymmetricTensor3> {
    if w.nrows() != m3.dim() {
        return Err(Error::LengthMismatch(w.nrows(), m3.dim()));
    }
    SymmetricTensor3::symmetrized(w.ncols(), multilinear(m3, w, fc))
}

/// `w_i ∝ 1/λ_i²` and `μ_i = λ_i·B·v_i`.
///
/// Weights are clipped at `1e−12` and renormalized onto the simplex.
pub fn recover_parameters(dec: &Decomposition, whitening: &Whitening, sigma2: f64) -> Result<GmmModel> {
    let k = dec.dim();
    if whitening.b.ncols() != k {
        return Err(Error::LengthMismatch(whitening.b.ncols(), k));
    }
    let failed: Vec<usize> = (0..k).filter(|&i| !(dec.lambdas[i] > NULL_TOLERANCE)).collect();
    if !failed.is_empty() {
        return Err(Error::Recovery(failed));
    }
    let raw: Vec<f64> = dec.lambdas.iter().map(|l| 1.0 / (l * l)).collect();
    let total: f64 = raw.iter().sum();
    let clipped: Vec<f64> = raw.iter().map(|w| (w / total).max(1e-12)).collect();
    let total: f64 = clipped.iter().sum();
    let weights = clipped.iter().map(|w| w / total).collect();
    let mut means = DMatrix::zeros(whitening.b.nrows(), k);
    for i in 0..k {
        let mu = &whitening.b * dec.v.column(i) * dec.lambdas[i];
        means.set_column(i, &mu);
    }
    // a moment estimate can make σ̂² non-positive; keep the model valid
    let sigma2 = if sigma2 > 0.0 { sigma2 } else { f64::MIN_POSITIVE };
    GmmModel::new(weights, means, sigma2)
}

/// Everything the moment pipeline produced.
#[derive(Debug, Clone)]
pub struct GmmFit {
    pub model: GmmModel,
    pub whitening: Whitening,
    pub whitened: SymmetricTensor3,
    pub decomposition: Decomposition,
    /// Residual of the decomposition against the whitened tensor.
    pub residual: f64,
    pub trace: Option<DescentTrace>,
}

/// Whitens, decomposes (from a random start drawn with `seed`) and recovers.
pub fn fit_from_moments(
    moments: &MomentEstimates,
    k: usize,
    seed: u64,
    mode: TensorMode,
    fc: &mut FlopCounter,
) -> Result<GmmFit> {
    let whitening = whiten(&moments.m2, k)?;
    let whitened = whiten_tensor(&moments.m3, &whitening.w, fc)?;
    let (decomposition, trace) = if k == 1 {
        let l = whitened.get(0, 0, 0);
        let mut v = OrthogonalMatrix::identity(1);
        if l < 0.0 {
            v.negate_column(0);
        }
        (Decomposition::new(vec![l.abs()], v), None)
    } else {
        let config = DescentConfig::new(default_tensor_stop(k), seed);
        let (dec, trace) = tensor_decompose(&whitened, random_orthogonal(k, seed)?, &config, mode, fc)?;
        (dec, Some(trace))
    };
    let residual = decomposition_residual(&whitened, &decomposition);
    let model = recover_parameters(&decomposition, &whitening, moments.sigma2_hat)?;
    Ok(GmmFit {
        model,
        whitening,
        whitened,
        decomposition,
        residual,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::{cluster_assign, nmi, sample_gmm, synth_model, GmmPreset};
    use crate::manifold::seeded_rng;
    use rand::Rng;

    fn known_model() -> GmmModel {
        GmmModel::new(
            vec![0.4, 0.6],
            DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 0.0, -1.0, 0.5, 2.0]),
            0.8,
        )
        .unwrap()
    }

    /// Matches recovered components to true ones by nearest mean.
    fn max_param_error(truth: &GmmModel, got: &GmmModel) -> f64 {
        let mut worst = (got.sigma2() - truth.sigma2()).abs();
        for i in 0..truth.components() {
            let j = (0..got.components())
                .min_by(|&a, &b| {
                    let da = (truth.means().column(i) - got.means().column(a)).norm();
                    let db = (truth.means().column(i) - got.means().column(b)).norm();
                    da.total_cmp(&db)
                })
                .unwrap();
            worst = worst.max((truth.means().column(i) - got.means().column(j)).abs().max());
            worst = worst.max((truth.weights()[i] - got.weights()[j]).abs());
        }
        worst
    }

    #[test]
    fn population_moments_are_the_mixture_sums() {
        let m = known_model();
        let est = population_moments(&m);
        let mut m2 = DMatrix::zeros(3, 3);
        let mut m3 = vec![0.0; 27];
        for i in 0..2 {
            let w = m.weights()[i];
            let mu = m.means().column(i);
            for a in 0..3 {
                for b in 0..3 {
                    m2[(a, b)] += w * mu[a] * mu[b];
                    for c in 0..3 {
                        m3[(a * 3 + b) * 3 + c] += w * mu[a] * mu[b] * mu[c];
                    }
                }
            }
        }
        assert!((est.sigma2_hat - 0.8).abs() < 1e-12);
        assert!((&est.m2 - m2).abs().max() < 1e-12);
        let worst = est.m3.as_slice().iter().zip(&m3).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-12);
        assert!(!est.conditioning_warning);
    }

    #[test]
    fn single_centered_component_has_empty_moments() {
        let m = GmmModel::new(vec![1.0], DMatrix::zeros(4, 1), 1.0).unwrap();
        let s = sample_gmm(&m, 50_000, 1).unwrap();
        let est = estimate_moments(&s.points, 1).unwrap();
        assert!(est.m2.abs().max() < 0.05);
        assert!(est.m3.as_slice().iter().all(|v| v.abs() < 0.05));
    }

    #[test]
    fn empirical_second_moment_converges() {
        let m = synth_model(GmmPreset::Separated, 10, 5, 2).unwrap();
        let s = sample_gmm(&m, 200_000, 3).unwrap();
        let est = estimate_moments(&s.points, 5).unwrap();
        let pop = population_moments(&m);
        assert!((&est.m2 - &pop.m2).norm() / pop.m2.norm() <= 0.05);
    }

    #[test]
    fn too_few_samples() {
        let pts = DMatrix::zeros(4, 4);
        assert!(matches!(estimate_moments(&pts, 2), Err(Error::InsufficientData { .. })));
        assert!(estimate_moments(&DMatrix::zeros(2, 10), 3).is_err());
    }

    #[test]
    fn whitening_cases() {
        let w = whiten(&DMatrix::identity(3, 3), 3).unwrap();
        assert!(((w.w.transpose() * &w.w) - DMatrix::<f64>::identity(3, 3)).abs().max() < 1e-12);
        let w = whiten(&DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0])), 2).unwrap();
        assert!((w.w.abs() - DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0])).abs().max() < 1e-15);
        let mut rng = seeded_rng(4);
        let g = DMatrix::from_fn(6, 3, |_, _| rng.random_range(-1.0..1.0));
        let m2 = &g * g.transpose();
        let w = whiten(&m2, 3).unwrap();
        assert!((w.w.transpose() * &m2 * &w.w - DMatrix::<f64>::identity(3, 3)).abs().max() < 1e-10);
        assert!(matches!(whiten(&m2, 4), Err(Error::RankDeficient { needed: 4, found: 3, .. })));
    }

    #[test]
    fn whitened_tensor_identity_and_scaling() {
        let m = known_model();
        let m3 = population_moments(&m).m3;
        let t = whiten_tensor(&m3, &DMatrix::identity(3, 3), &mut FlopCounter::new()).unwrap();
        assert!(t.as_slice().iter().zip(m3.as_slice()).all(|(a, b)| (a - b).abs() < 1e-15));
        let w = DMatrix::from_fn(3, 2, |r, c| 0.3 * r as f64 - 0.2 * c as f64 + 0.1);
        let t1 = whiten_tensor(&m3, &w, &mut FlopCounter::new()).unwrap();
        let t2 = whiten_tensor(&m3, &(&w * 2.0), &mut FlopCounter::new()).unwrap();
        assert!(t1.as_slice().iter().zip(t2.as_slice()).all(|(a, b)| (8.0 * a - b).abs() < 1e-13));
    }

    #[test]
    fn population_round_trip() {
        let m = known_model();
        let fit = fit_from_moments(&population_moments(&m), 2, 5, TensorMode::Accelerated, &mut FlopCounter::new()).unwrap();
        assert!(fit.residual <= 1e-8);
        assert!(max_param_error(&m, &fit.model) < 1e-6);
    }

    #[test]
    fn equal_weights_give_equal_lambdas() {
        let m = synth_model(GmmPreset::Gaussian, 5, 4, 6).unwrap();
        let fit = fit_from_moments(&population_moments(&m), 4, 7, TensorMode::Naive, &mut FlopCounter::new()).unwrap();
        for l in &fit.decomposition.lambdas {
            assert!((l - 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn null_lambda_is_a_recovery_error() {
        let dec = Decomposition::new(vec![1.0, 0.0], OrthogonalMatrix::identity(2));
        let wh = whiten(&DMatrix::identity(2, 2), 2).unwrap();
        assert!(matches!(recover_parameters(&dec, &wh, 1.0), Err(Error::Recovery(v)) if v == vec![1]));
    }

    #[test]
    fn finite_sample_fit_is_close() {
        let m = synth_model(GmmPreset::Separated, 10, 5, 8).unwrap();
        let s = sample_gmm(&m, 200_000, 9).unwrap();
        let est = estimate_moments(&s.points, 5).unwrap();
        let fit = fit_from_moments(&est, 5, 10, TensorMode::Accelerated, &mut FlopCounter::new()).unwrap();
        let mut total = 0.0;
        for i in 0..5 {
            let best = (0..5)
                .map(|j| (m.means().column(i) - fit.model.means().column(j)).abs().sum() / 10.0)
                .fold(f64::INFINITY, f64::min);
            total += best;
        }
        assert!(total / 5.0 <= 0.1, "mean per-coordinate error {}", total / 5.0);
        let labels = cluster_assign(&s.points, &fit.model).unwrap();
        assert!(nmi(&labels, &s.labels).unwrap() > 0.9);
    }
}
