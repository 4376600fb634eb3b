//! Recovers the factors of an orthogonally decomposable tensor, in both the
//! naive and the accelerated update modes, and compares their cost.
//!
//! cargo run --example tensor_decomposition

use givens::manifold::{random_orthogonal, DescentConfig};
use givens::tensor::{
    decomposition_residual, default_tensor_stop, synth_orthogonal_tensor, tensor_decompose, TensorMode,
};
use givens::{FlopCounter, Result};

fn main() -> Result<()> {
    let lambdas = [3.0, 2.5, 2.0, 1.5, 1.25, 1.0];
    let d = lambdas.len();
    let v = random_orthogonal(d, 31)?;
    let t = synth_orthogonal_tensor(&lambdas, &v)?;
    let config = DescentConfig::new(default_tensor_stop(d), 33);

    for mode in [TensorMode::Naive, TensorMode::Accelerated] {
        let mut fc = FlopCounter::new();
        let (dec, trace) = tensor_decompose(&t, random_orthogonal(d, 32)?, &config, mode, &mut fc)?;
        let mut found = dec.lambdas.clone();
        found.sort_by(|a, b| b.total_cmp(a));
        println!("{mode:?}");
        println!("  stop       {:?} after {} iterations", trace.stop, trace.iterations());
        println!("  objective  {:.12} (sum of weights {})", trace.final_objective(), lambdas.iter().sum::<f64>());
        println!("  weights    {found:.9?}");
        println!("  residual   {:.3e}", decomposition_residual(&t, &dec));
        println!("  work       {fc}");
    }
    Ok(())
}
