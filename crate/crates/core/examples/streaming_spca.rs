//! Streaming sparse PCA: a 5-column buffer is refreshed one sample at a time
//! and stopped early after 30% of the stream.
//!
//! cargo run --example streaming_spca

use givens::manifold::{random_orthogonal, seeded_rng};
use givens::spca::{adjusted_explained_variance, DataMatrix};
use givens::streaming::{early_stop_budget, spca_stream, MatrixStream, StreamOptions};
use givens::{FlopCounter, Result};
use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

fn main() -> Result<()> {
    let (d, n, m) = (40, 500, 5);
    let mut rng = seeded_rng(21);
    // one latent factor loads on the first six features
    let latent: Vec<f64> = (0..n)
        .map(|_| {
            let x: f64 = StandardNormal.sample(&mut rng);
            2.0 * x
        })
        .collect();
    let a = DMatrix::from_fn(d, n, |k, s| {
        let x: f64 = StandardNormal.sample(&mut rng);
        0.3 * x + if k < 6 { latent[s] } else { 0.0 }
    });
    let a = DataMatrix::new(a)?;

    for frac in [0.3, 1.0] {
        let mut options = StreamOptions::new(9);
        options.sample_budget = Some(early_stop_budget(frac, n)?);
        let mut fc = FlopCounter::new();
        let res = spca_stream(&mut MatrixStream::new(&a), &random_orthogonal(m, 8)?, 1.0, &options, &mut fc)?;
        let var = adjusted_explained_variance(&a, &res.loadings.z);
        println!(
            "fraction {frac:.1}: consumed {:>3} samples, nnz {:>3}, adjusted variance {:.4}, {fc}",
            res.state.consumed(),
            res.loadings.nonzeros(),
            var.normalized
        );
    }
    Ok(())
}
