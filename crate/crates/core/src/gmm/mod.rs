//! Spherical Gaussian mixtures fitted by the method of moments.
//!
//! The whitened, corrected third moment of a mixture with shared spherical
//! covariance is orthogonally decomposable; decomposing it with the tensor
//! solver gives weights and means back. The pipeline is
//! [`estimate_moments`] → [`whiten`] → [`whiten_tensor`] →
//! [`crate::tensor::tensor_decompose`] → [`recover_parameters`], wrapped
//! up in [`fit_from_moments`].

mod moments;

pub use moments::{
    estimate_moments, fit_from_moments, population_moments, recover_parameters, whiten, whiten_tensor, GmmFit,
    MomentEstimates, Whitening, EIGEN_TOLERANCE,
};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::manifold::{random_orthogonal_with, seeded_rng};
use crate::{Error, Result};

/// Mixture `Σ w_i N(μ_i, σ²I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    weights: Vec<f64>,
    /// `D×k`, one mean per column.
    means: DMatrix<f64>,
    sigma2: f64,
}

impl GmmModel {
    pub fn new(weights: Vec<f64>, means: DMatrix<f64>, sigma2: f64) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.ncols() != k || means.nrows() == 0 {
            return Err(Error::Shape(format!(
                "{k} weights for a {}x{} mean matrix",
                means.nrows(),
                means.ncols()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Config("mixture weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("mixture weights sum to {total}, not 1")));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::Config(format!("variance must be positive, got {sigma2}")));
        }
        if means.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("means must be finite".into()));
        }
        Ok(Self { weights, means, sigma2 })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.nrows()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &DMatrix<f64> {
        &self.means
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
}

/// Synthetic model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GmmPreset {
    /// `μ_i ~ N(0, 9·I)`, `σ² = 1`.
    #[default]
    Gaussian,
    /// `μ_i = 6·q_i` for orthonormal `q_i`, `σ² = 1`.
    Separated,
    /// `μ_i ~ N(0, Σ)` with `Σ ~ W⁻¹(I, D + 2)`, `σ² = 2`.
    InverseWishart,
}

/// A model from `preset` with `k` equally weighted components in `R^D`.
pub fn synth_model(preset: GmmPreset, dim: usize, k: usize, seed: u64) -> Result<GmmModel> {
    if k == 0 || k > dim {
        return Err(Error::Config(format!("need 1 <= k <= D, got k = {k}, D = {dim}")));
    }
    let mut rng = seeded_rng(seed);
    let (means, sigma2) = match preset {
        GmmPreset::Gaussian => (
            DMatrix::from_fn(dim, k, |_, _| 3.0 * rng.sample::<f64, _>(StandardNormal)),
            1.0,
        ),
        GmmPreset::Separated => {
            let q = random_orthogonal_with(dim, &mut rng);
            (q.as_matrix().columns(0, k) * 6.0, 1.0)
        }
        GmmPreset::InverseWishart => {
            let nu = dim + 2;
            let g = DMatrix::from_fn(dim, nu, |_, _| rng.sample::<f64, _>(StandardNormal));
            let wishart = &g * g.transpose();
            let cov = wishart
                .try_inverse()
                .ok_or_else(|| Error::Config("singular Wishart draw".into()))?;
            let chol = cov
                .cholesky()
                .ok_or_else(|| Error::Config("inverse-Wishart draw not positive definite".into()))?;
            let z = DMatrix::from_fn(dim, k, |_, _| rng.sample::<f64, _>(StandardNormal));
            (chol.l() * z, 2.0)
        }
    };
    GmmModel::new(vec![1.0 / k as f64; k], means, sigma2)
}

/// One draw and the component it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub point: DVector<f64>,
    pub label: usize,
}

/// Draws stored column-wise (`D×n`) with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmSamples {
    pub points: DMatrix<f64>,
    pub labels: Vec<usize>,
}

impl GmmSamples {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, idx: usize) -> LabeledSample {
        LabeledSample {
            point: self.points.column(idx).into_owned(),
            label: self.labels[idx],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = LabeledSample> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }
}

/// `n` draws: a component by weight, then `μ + σ·z` with standard normal `z`.
pub fn sample_gmm(model: &GmmModel, n: usize, seed: u64) -> Result<GmmSamples> {
    if n == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let mut rng = seeded_rng(seed);
    let d = model.dim();
    let sigma = model.sigma2.sqrt();
    let mut cumulative = Vec::with_capacity(model.components());
    let mut acc = 0.0;
    for w in &model.weights {
        acc += w;
        cumulative.push(acc);
    }
    let mut points = DMatrix::zeros(d, n);
    let mut labels = Vec::with_capacity(n);
    for s in 0..n {
        let r: f64 = rng.random::<f64>() * acc;
        let label = cumulative.iter().position(|&c| r < c).unwrap_or(cumulative.len() - 1);
        let mean = model.means.column(label);
        let mut col = points.column_mut(s);
        for a in 0..d {
            col[a] = mean[a] + sigma * rng.sample::<f64, _>(StandardNormal);
        }
        labels.push(label);
    }
    Ok(GmmSamples { points, labels })
}

/// `argmax_i log w_i − ‖x − μ_i‖²/(2σ²)`, ties to the lowest index.
pub fn cluster_assign(points: &DMatrix<f64>, model: &GmmModel) -> Result<Vec<usize>> {
    if points.nrows() != model.dim() {
        return Err(Error::LengthMismatch(points.nrows(), model.dim()));
    }
    let log_w: Vec<f64> = model.weights.iter().map(|w| w.ln()).collect();
    let scale = 0.5 / model.sigma2;
    Ok(points
        .column_iter()
        .map(|x| {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (i, lw) in log_w.iter().enumerate() {
                let dist2 = (x - model.means.column(i)).norm_squared();
                let score = lw - scale * dist2;
                if score > best_score {
                    best = i;
                    best_score = score;
                }
            }
            best
        })
        .collect())
}

/// Normalized mutual information `I(A;B) / ((H(A) + H(B))/2)`, natural log.
///
/// Label values are arbitrary; only the induced partitions matter. Two
/// single-cluster partitions score 1.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::Config("cannot compare empty labelings".into()));
    }
    let relabel = |labels: &[usize]| {
        let mut seen = std::collections::BTreeMap::new();
        let dense: Vec<usize> = labels
            .iter()
            .map(|l| {
                let next = seen.len();
                *seen.entry(*l).or_insert(next)
            })
            .collect();
        (dense, seen.len())
    };
    let (da, ka) = relabel(a);
    let (db, kb) = relabel(b);
    let n = a.len() as f64;
    let mut joint = vec![0usize; ka * kb];
    let mut ca = vec![0usize; ka];
    let mut cb = vec![0usize; kb];
    for (&x, &y) in da.iter().zip(&db) {
        joint[x * kb + y] += 1;
        ca[x] += 1;
        cb[y] += 1;
    }
    let entropy = |counts: &[usize]| -> f64 {
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let (ha, hb) = (entropy(&ca), entropy(&cb));
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    let mut terms = Vec::new();
    for x in 0..ka {
        for y in 0..kb {
            let c = joint[x * kb + y];
            if c > 0 {
                let pxy = c as f64 / n;
                terms.push(pxy * (c as f64 * n / (ca[x] as f64 * cb[y] as f64)).ln());
            }
        }
    }
    // sorted summation makes the result independent of argument order
    terms.sort_by(f64::total_cmp);
    let mi: f64 = terms.iter().sum();
    Ok((mi / (0.5 * (ha + hb))).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cluster_model() -> GmmModel {
        GmmModel::new(
            vec![0.3, 0.7],
            DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 2.0, -1.0, 3.0, 0.5]),
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn model_validation() {
        let means = DMatrix::zeros(2, 2);
        assert!(GmmModel::new(vec![0.5, 0.6], means.clone(), 1.0).is_err());
        assert!(GmmModel::new(vec![0.5, 0.5], means.clone(), 0.0).is_err());
        assert!(GmmModel::new(vec![1.0, 0.0], means.clone(), 1.0).is_err());
        assert!(GmmModel::new(vec![1.0], means, 1.0).is_err());
    }

    #[test]
    fn vanishing_noise_puts_samples_on_means() {
        let mut m = two_cluster_model();
        m.sigma2 = 1e-12;
        let s = sample_gmm(&m, 500, 1).unwrap();
        for x in s.iter() {
            assert!((x.point - m.means.column(x.label)).abs().max() < 1e-5);
        }
    }

    #[test]
    fn label_frequencies_follow_weights() {
        let m = two_cluster_model();
        let n = 100_000;
        let s = sample_gmm(&m, n, 2).unwrap();
        let ones = s.labels.iter().filter(|&&l| l == 1).count() as f64 / n as f64;
        assert!((ones - 0.7).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = two_cluster_model();
        assert_eq!(sample_gmm(&m, 50, 3).unwrap(), sample_gmm(&m, 50, 3).unwrap());
        assert_ne!(sample_gmm(&m, 50, 3).unwrap(), sample_gmm(&m, 50, 4).unwrap());
    }

    #[test]
    fn presets_are_valid() {
        for p in [GmmPreset::Gaussian, GmmPreset::Separated, GmmPreset::InverseWishart] {
            let m = synth_model(p, 6, 3, 5).unwrap();
            assert_eq!((m.dim(), m.components()), (6, 3));
        }
        let sep = synth_model(GmmPreset::Separated, 5, 3, 6).unwrap();
        let gram = sep.means().transpose() * sep.means();
        assert!((gram - DMatrix::<f64>::identity(3, 3) * 36.0).abs().max() < 1e-10);
        assert!(synth_model(GmmPreset::Gaussian, 3, 4, 0).is_err());
    }

    #[test]
    fn points_at_means_get_their_own_label() {
        let m = GmmModel::new(vec![0.5, 0.5], DMatrix::from_column_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]), 1.0).unwrap();
        let labels = cluster_assign(m.means(), &m).unwrap();
        assert_eq!(labels, vec![0, 1]);
        // equidistant point: tie goes to the lower index
        let mid = DMatrix::from_column_slice(2, 1, &[0.5, 0.5]);
        assert_eq!(cluster_assign(&mid, &m).unwrap(), vec![0]);
    }

    #[test]
    fn huge_variance_follows_weights() {
        let m = GmmModel::new(vec![0.2, 0.8], DMatrix::from_column_slice(1, 2, &[0.0, 5.0]), 1e12).unwrap();
        let pts = DMatrix::from_row_slice(1, 3, &[-3.0, 0.0, 4.0]);
        assert_eq!(cluster_assign(&pts, &m).unwrap(), vec![1, 1, 1]);
    }

    #[test]
    fn assignment_matches_posterior() {
        let m = two_cluster_model();
        let s = sample_gmm(&m, 300, 7).unwrap();
        let labels = cluster_assign(&s.points, &m).unwrap();
        for (x, l) in s.points.column_iter().zip(labels) {
            // posterior up to the shared normalizer
            let post: Vec<f64> = (0..2)
                .map(|i| {
                    let d2 = (x - m.means.column(i)).norm_squared();
                    m.weights[i] * (-d2 / (2.0 * m.sigma2)).exp()
                })
                .collect();
            let expected = if post[1] > post[0] { 1 } else { 0 };
            assert_eq!(l, expected);
        }
    }

    #[test]
    fn nmi_cases() {
        let a = [0, 0, 1, 1, 2, 2];
        assert!((nmi(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((nmi(&a, &[5, 5, 3, 3, 9, 9]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.0);
        assert_eq!(nmi(&[4, 4, 4], &[1, 1, 1]).unwrap(), 1.0);
        assert!(nmi(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn nmi_hand_value_and_symmetry() {
        let a = [0, 0, 0, 1];
        let b = [0, 0, 1, 1];
        // H(A) = −(3/4)ln(3/4) − (1/4)ln(1/4), H(B) = ln 2,
        // I = (1/2)ln(2·... ) computed from the table [[2,1],[0,1]]
        let ha = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        let hb = 2f64.ln();
        let mi = 0.5 * (0.5f64 / (0.75 * 0.5)).ln() + 0.25 * (0.25f64 / (0.75 * 0.5)).ln() + 0.25 * (0.25f64 / (0.25 * 0.5)).ln();
        let expected = mi / (0.5 * (ha + hb));
        assert!((nmi(&a, &b).unwrap() - expected).abs() < 1e-15);
        assert_eq!(nmi(&a, &b).unwrap(), nmi(&b, &a).unwrap());
    }
}
