//! Minimizes the Brockett cost `Tr(UᵀAUN)` over orthogonal matrices with
//! randomized Givens coordinate descent and compares against the spectral
//! minimum.
//!
//! cargo run --example coordinate_descent

use givens::manifold::{
    coordinate_minimize, random_orthogonal, riemannian_gradient, seeded_rng, BrockettObjective,
    CoordinateObjective, DescentConfig, StoppingRule,
};
use givens::{FlopCounter, Result};
use nalgebra::DMatrix;
use rand::Rng;

fn main() -> Result<()> {
    let d = 8;
    let mut rng = seeded_rng(1);
    let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let a = (&m + m.transpose()) * 0.5;
    let weights = (0..d).map(|k| (d - k) as f64).collect();
    let obj = BrockettObjective::new(a, weights)?;

    let stop = StoppingRule {
        max_iters: Some(5_000),
        grad_tol: Some(1e-10),
        ..StoppingRule::default()
    };
    let mut config = DescentConfig::new(stop, 7);
    config.grad_every = Some(50);

    let mut fc = FlopCounter::new();
    let (u, trace) = coordinate_minimize(&obj, random_orthogonal(d, 3)?, &config, &mut fc)?;

    println!("iteration  objective            |grad|^2");
    for r in trace.records.iter().filter(|r| r.grad_norm2.is_some()) {
        println!("{:>9}  {:<19.12}  {:.3e}", r.iteration, r.objective, r.grad_norm2.unwrap());
    }
    let grad = riemannian_gradient(&obj, &u, &mut FlopCounter::new());
    println!();
    println!("stopped by       {:?} after {} steps", trace.stop, trace.iterations());
    println!("final objective  {:.12}", obj.eval(&u, &mut FlopCounter::new()));
    println!("spectral minimum {:.12}", obj.minimum());
    println!("gradient norm    {:.3e}", grad.norm());
    println!("orthogonality    {:.3e}", u.defect());
    println!("work             {fc}");
    Ok(())
}
