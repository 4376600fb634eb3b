//! Sparse PCA on a planted-support data set: sweeps the penalty and reports
//! sparsity and adjusted explained variance of the loadings.
//!
//! cargo run --example sparse_pca

use givens::manifold::{random_orthogonal, seeded_rng, DescentConfig, StoppingRule};
use givens::spca::{adjusted_explained_variance, sparsity, spca_full, DataMatrix};
use givens::{FlopCounter, Result};
use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};

fn main() -> Result<()> {
    // 30 features, 12 samples; features 0..5 and 5..10 carry two latent factors
    let (d, n) = (30, 12);
    let mut rng = seeded_rng(11);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let factors: Vec<[f64; 2]> = (0..n).map(|_| [noise.sample(&mut rng) * 10.0, noise.sample(&mut rng) * 7.0]).collect();
    let a = DMatrix::from_fn(d, n, |k, s| {
        let signal = match k {
            0..5 => factors[s][0],
            5..10 => factors[s][1],
            _ => 0.0,
        };
        signal + noise.sample(&mut rng)
    });
    let a = DataMatrix::new(a)?;
    println!("max row norm {:.3}", a.max_row_norm());

    println!("gamma   objective     nnz  sparsity  adj.var  flops");
    for gamma in [0.0, 0.5, 1.0, 2.0, 3.0] {
        let config = DescentConfig::new(StoppingRule::iterations(20 * (n * (n - 1) / 2) as u64), 5);
        let mut fc = FlopCounter::new();
        let res = spca_full(&a, gamma, &random_orthogonal(n, 4)?, &config, &mut fc)?;
        let var = adjusted_explained_variance(&a, &res.loadings.z);
        println!(
            "{gamma:<6.2}  {:<12.4}  {:>3}  {:<8.3}  {:<7.4}  {}",
            res.trace.final_objective(),
            res.loadings.nonzeros(),
            sparsity(&res.loadings.z),
            var.normalized,
            fc.count()
        );
    }
    Ok(())
}
