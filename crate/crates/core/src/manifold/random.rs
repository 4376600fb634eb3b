use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::orthogonal::OrthogonalMatrix;
use crate::{Error, Result};

/// The crate-wide seeded generator. Streams are portable across platforms.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Haar-distributed orthogonal matrix: QR of a seeded Gaussian matrix with
/// the signs of `Q`'s columns fixed so that `R` has a positive diagonal.
pub fn random_orthogonal(d: usize, seed: u64) -> Result<OrthogonalMatrix> {
    if d == 0 {
        return Err(Error::InvalidDimension("dimension must be at least 1".into()));
    }
    let mut rng = seeded_rng(seed);
    Ok(random_orthogonal_with(d, &mut rng))
}

pub(crate) fn random_orthogonal_with<R: Rng>(d: usize, rng: &mut R) -> OrthogonalMatrix {
    // column-major fill, so the draw order is fixed by the layout
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..d {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    OrthogonalMatrix::from_trusted(q)
}

/// Uniform sampler over the `d(d−1)/2` pairs `i < j`.
///
/// With replacement by default. [`PairSampler::mark_stalled`] excludes a pair
/// from subsequent draws until [`PairSampler::clear_stalled`] is called.
#[derive(Debug, Clone)]
pub struct PairSampler {
    dim: usize,
    pairs: Vec<(usize, usize)>,
    stalled: Vec<bool>,
    stalled_count: usize,
    rng: ChaCha8Rng,
}

impl PairSampler {
    pub fn new(d: usize, seed: u64) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(format!(
                "coordinate pairs need at least 2 columns, got {d}"
            )));
        }
        let pairs: Vec<_> = (0..d)
            .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
            .collect();
        let n = pairs.len();
        Ok(Self {
            dim: d,
            pairs,
            stalled: vec![false; n],
            stalled_count: 0,
            rng: seeded_rng(seed),
        })
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    fn index_of(&self, i: usize, j: usize) -> usize {
        let d = self.dim;
        // row-by-row packing of the strict upper triangle
        i * (2 * d - i - 1) / 2 + (j - i - 1)
    }

    /// Next pair; `None` once every pair is stalled.
    pub fn next_pair(&mut self) -> Option<(usize, usize)> {
        let n = self.pairs.len();
        if self.stalled_count == n {
            return None;
        }
        if self.stalled_count == 0 {
            return Some(self.pairs[self.rng.random_range(0..n)]);
        }
        if 2 * self.stalled_count <= n {
            loop {
                let k = self.rng.random_range(0..n);
                if !self.stalled[k] {
                    return Some(self.pairs[k]);
                }
            }
        }
        let open: Vec<usize> = (0..n).filter(|&k| !self.stalled[k]).collect();
        Some(self.pairs[open[self.rng.random_range(0..open.len())]])
    }

    pub fn mark_stalled(&mut self, i: usize, j: usize) {
        let k = self.index_of(i, j);
        if !self.stalled[k] {
            self.stalled[k] = true;
            self.stalled_count += 1;
        }
    }

    pub fn clear_stalled(&mut self) {
        if self.stalled_count > 0 {
            self.stalled.iter_mut().for_each(|s| *s = false);
            self.stalled_count = 0;
        }
    }

    pub fn all_stalled(&self) -> bool {
        self.stalled_count == self.pairs.len()
    }
}
