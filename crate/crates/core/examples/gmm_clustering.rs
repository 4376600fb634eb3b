//! Spectral Gaussian-mixture estimation: third-moment tensor, whitening,
//! orthogonal decomposition, parameter recovery and clustering quality.
//!
//! cargo run --release --example gmm_clustering

use givens::gmm::{cluster_assign, estimate_moments, fit_from_moments, nmi, sample_gmm, synth_model, GmmPreset};
use givens::tensor::TensorMode;
use givens::{FlopCounter, Result};

fn main() -> Result<()> {
    let (dim, k) = (10, 5);
    let truth = synth_model(GmmPreset::Separated, dim, k, 41)?;
    println!("true sigma^2 {:.4}", truth.sigma2());
    println!("samples   NMI      sigma^2  residual");
    for n in [10_000, 50_000, 200_000] {
        let samples = sample_gmm(&truth, n, 42)?;
        let moments = estimate_moments(&samples.points, k)?;
        if moments.conditioning_warning {
            println!("  (second moment is poorly conditioned)");
        }
        let fit = fit_from_moments(&moments, k, 43, TensorMode::Accelerated, &mut FlopCounter::new())?;
        let labels = cluster_assign(&samples.points, &fit.model)?;
        println!(
            "{n:>7}   {:.5}  {:.4}   {:.2e}",
            nmi(&labels, &samples.labels)?,
            fit.model.sigma2(),
            fit.residual
        );
    }
    Ok(())
}
