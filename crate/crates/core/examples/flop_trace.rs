//! Writes a FLOP-indexed objective trace for a sparse PCA run as TSV, the
//! same format the `givens` binary produces, and reads it back.
//!
//! cargo run --example flop_trace -- [out.tsv]

use std::path::PathBuf;

use givens::cli::io::{read_trace_tsv, trace_rows, write_trace_tsv};
use givens::manifold::{random_orthogonal, seeded_rng, DescentConfig, StoppingRule};
use givens::spca::{spca_full, DataMatrix};
use givens::{FlopCounter, Result};
use nalgebra::DMatrix;
use rand::Rng;

fn main() -> Result<()> {
    let path = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("givens_flop_trace.tsv"));
    let mut rng = seeded_rng(51);
    let a = DataMatrix::new(DMatrix::from_fn(20, 8, |_, _| rng.random_range(-1.0..1.0)))?;
    let config = DescentConfig::new(StoppingRule::iterations(200), 52);
    let mut fc = FlopCounter::new();
    let res = spca_full(&a, 0.4, &random_orthogonal(8, 53)?, &config, &mut fc)?;

    write_trace_tsv(&path, &trace_rows(&res.trace))?;
    let rows = read_trace_tsv(&path)?;
    println!("wrote {} rows to {}", rows.len(), path.display());
    for r in rows.iter().step_by(40) {
        println!("{:>5} {:>8} flops  objective {:.6}  nnz {:?}", r.iteration, r.cumulative_flops, r.objective, r.nnz);
    }
    Ok(())
}
