//! Command-line harness: `givens spca | spca-stream | tensor | gmm`.
//!
//! Every command takes a mandatory `--seed` and writes into `--out-dir`.
//! Outputs depend only on the inputs, the flags and the seed, so repeated
//! runs are byte-identical. Exit codes: 0 success, 2 input or configuration
//! error, 3 numerical failure.

pub mod io;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::gmm::{
    cluster_assign, estimate_moments, fit_from_moments, nmi, sample_gmm, synth_model, GmmPreset,
};
use crate::manifold::{random_orthogonal, DescentConfig, StoppingRule};
use crate::spca::{adjusted_explained_variance, spca_full, spca_objective, sparsity, DataMatrix, SparseLoadings};
use crate::streaming::{early_stop_budget, spca_stream, MatrixStream, SampleStream, StreamOptions};
use crate::tensor::{
    decomposition_residual, default_tensor_stop, synth_orthogonal_tensor, tensor_decompose, SymmetricTensor3,
    TensorMode,
};
use crate::{Error, FlopCounter, Result};
use io::{trace_rows, write_json, write_matrix_csv, write_tensor_file, write_trace_tsv};

pub const SCHEMA_VERSION: u32 = 1;

/// Tolerance under which a tensor file counts as symmetric.
pub const FILE_SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "givens", version, about = "Givens coordinate descent on the orthogonal group")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sparse PCA with m = n components.
    Spca(SpcaArgs),
    /// Streaming sparse PCA with m < n buffered components.
    SpcaStream(StreamArgs),
    /// Orthogonal decomposition of a symmetric 3-tensor.
    Tensor(TensorArgs),
    /// Spherical GMM by the method of moments.
    Gmm(GmmArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Random seed; runs are pure functions of it.
    #[arg(long)]
    pub seed: u64,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Run this many seeds (seed, seed+1, ...) into out-dir/run-<k>.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub repeat: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SpcaArgs {
    /// Numeric CSV; rows are features unless --transpose.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub max_iters: Option<u64>,
    #[arg(long)]
    pub max_flops: Option<u64>,
    /// Relative objective change over one sweep of pairs.
    #[arg(long)]
    pub tol: Option<f64>,
    /// The CSV has one sample per row.
    #[arg(long)]
    pub transpose: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct StreamArgs {
    /// Numeric CSV; rows are features unless --transpose (then rows are
    /// streamed one at a time).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub gamma: f64,
    /// Buffer size m.
    #[arg(long)]
    pub components: usize,
    /// Rotations per new sample (default m).
    #[arg(long)]
    pub inner_iters: Option<usize>,
    /// Stop after this fraction of the samples (0.14 reproduces the early-stop preset).
    #[arg(long)]
    pub early_stop_frac: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[arg(long)]
    pub transpose: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Naive,
    Accelerated,
}

impl From<ModeArg> for TensorMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Naive => TensorMode::Naive,
            ModeArg::Accelerated => TensorMode::Accelerated,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TensorArgs {
    /// Tensor text file.
    #[arg(long, required_unless_present = "synth_lambdas", conflicts_with = "synth_lambdas")]
    pub input: Option<PathBuf>,
    /// Build Σ λ_i v_i⊗v_i⊗v_i with random orthogonal V instead of reading a file.
    #[arg(long, value_delimiter = ',')]
    pub synth_lambdas: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = ModeArg::Accelerated)]
    pub mode: ModeArg,
    /// Default 50·d².
    #[arg(long)]
    pub max_iters: Option<u64>,
    #[arg(long)]
    pub max_flops: Option<u64>,
    /// Gradient-norm tolerance (default 1e-9).
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Gaussian,
    Separated,
    InverseWishart,
}

impl From<PresetArg> for GmmPreset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Gaussian => GmmPreset::Gaussian,
            PresetArg::Separated => GmmPreset::Separated,
            PresetArg::InverseWishart => GmmPreset::InverseWishart,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GmmArgs {
    /// Sample CSV (columns are samples unless --transpose); synthesize if absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Number of components k.
    #[arg(long)]
    pub components: usize,
    /// Ambient dimension D of synthetic data.
    #[arg(long, default_value_t = 10)]
    pub dim: usize,
    /// Number of synthetic samples.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = PresetArg::Gaussian)]
    pub preset: PresetArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Accelerated)]
    pub mode: ModeArg,
    #[arg(long)]
    pub transpose: bool,
    #[command(flatten)]
    pub common: Common,
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                2
            } else {
                0
            }
        }
    }
}

pub fn run(cli: &Cli) -> i32 {
    match &cli.command {
        Command::Spca(a) => cmd_spca(a),
        Command::SpcaStream(a) => cmd_spca_stream(a),
        Command::Tensor(a) => cmd_tensor(a),
        Command::Gmm(a) => cmd_gmm(a),
    }
}

/// 0 on success, 3 for numerical failures, 2 for everything else.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numeric() {
                3
            } else {
                2
            }
        }
    }
}

fn repeat<F: FnMut(u64, &Path) -> Result<()>>(common: &Common, mut body: F) -> Result<()> {
    for k in 0..common.repeat {
        let dir = if common.repeat == 1 {
            common.out_dir.clone()
        } else {
            common.out_dir.join(format!("run-{k}"))
        };
        std::fs::create_dir_all(&dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
        body(common.seed.wrapping_add(k), &dir)?;
    }
    Ok(())
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("--{name} must be finite, got {v}")))
    }
}

#[derive(Debug, Serialize)]
struct SpcaMetrics {
    schema_version: u32,
    command: &'static str,
    seed: u64,
    features: usize,
    samples: usize,
    components: usize,
    gamma: f64,
    objective: f64,
    adjusted_variance: f64,
    adjusted_variance_normalized: f64,
    effective_rank: usize,
    sparsity: f64,
    nonzeros: usize,
    zero_columns: usize,
    iterations: u64,
    stop: String,
    total_flops: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples_consumed: Option<usize>,
}

fn spca_metrics(
    command: &'static str,
    seed: u64,
    a: &DataMatrix,
    gamma: f64,
    objective: f64,
    loadings: &SparseLoadings,
    iterations: u64,
    stop: String,
    total_flops: u64,
) -> SpcaMetrics {
    let av = adjusted_explained_variance(a, &loadings.z);
    SpcaMetrics {
        schema_version: SCHEMA_VERSION,
        command,
        seed,
        features: a.features(),
        samples: a.samples(),
        components: loadings.z.ncols(),
        gamma,
        objective,
        adjusted_variance: av.raw,
        adjusted_variance_normalized: av.normalized,
        effective_rank: av.effective_rank,
        sparsity: sparsity(&loadings.z),
        nonzeros: loadings.nonzeros(),
        zero_columns: loadings.zero_columns.iter().filter(|z| **z).count(),
        iterations,
        stop,
        total_flops,
        samples_consumed: None,
    }
}

pub fn cmd_spca(args: &SpcaArgs) -> i32 {
    exit_code(&run_spca(args))
}

fn run_spca(args: &SpcaArgs) -> Result<()> {
    let gamma = finite("gamma", args.gamma)?;
    let a = DataMatrix::new(io::read_matrix_csv(&args.input, args.transpose)?)?;
    let n = a.samples();
    let stop = StoppingRule {
        max_iters: match (args.max_iters, args.max_flops) {
            (None, None) => Some(20 * (n * n.saturating_sub(1) / 2) as u64),
            (m, _) => m,
        },
        max_flops: args.max_flops,
        rel_tol: args.tol,
        grad_tol: None,
    };
    repeat(&args.common, |seed, dir| {
        let mut fc = FlopCounter::new();
        let u0 = random_orthogonal(n, seed)?;
        let config = DescentConfig::new(stop, seed);
        let r = spca_full(&a, gamma, &u0, &config, &mut fc)?;
        let objective = r.trace.final_objective();
        let metrics = spca_metrics(
            "spca",
            seed,
            &a,
            gamma,
            objective,
            &r.loadings,
            r.trace.iterations(),
            format!("{:?}", r.trace.stop),
            fc.count(),
        );
        write_matrix_csv(&dir.join("loadings.csv"), &r.loadings.z)?;
        write_json(&dir.join("metrics.json"), &metrics)?;
        write_trace_tsv(&dir.join("trace.tsv"), &trace_rows(&r.trace))?;
        println!("seed {seed}: objective {objective}, nnz {}, {fc}", r.loadings.nonzeros());
        Ok(())
    })
}

pub fn cmd_spca_stream(args: &StreamArgs) -> i32 {
    exit_code(&run_spca_stream(args))
}

fn run_spca_stream(args: &StreamArgs) -> Result<()> {
    let gamma = finite("gamma", args.gamma)?;
    if !(gamma >= 0.0) {
        return Err(Error::Config(format!("--gamma must be >= 0, got {gamma}")));
    }
    if args.components == 0 {
        return Err(Error::Config("--components must be at least 1".into()));
    }
    // Samples-as-columns files have to be read whole; samples-as-rows files
    // are streamed and only re-read afterwards for the metrics.
    let in_memory = if args.transpose {
        None
    } else {
        Some(DataMatrix::new(io::read_matrix_csv(&args.input, false)?)?)
    };
    let n = match &in_memory {
        Some(a) => a.samples(),
        None => io::count_csv_rows(&args.input)?,
    };
    if n < args.components {
        return Err(Error::InsufficientData {
            needed: args.components,
            available: n,
        });
    }
    let budget = args.early_stop_frac.map(|f| early_stop_budget(f, n)).transpose()?;
    repeat(&args.common, |seed, dir| {
        let mut fc = FlopCounter::new();
        let u0 = random_orthogonal(args.components, seed)?;
        let options = StreamOptions {
            inner_iters: args.inner_iters,
            seed,
            sample_budget: budget,
            epochs: args.epochs,
        };
        let r = match &in_memory {
            Some(a) => spca_stream(&mut MatrixStream::new(a), &u0, gamma, &options, &mut fc)?,
            None => {
                let mut s = io::CsvRowStream::open(&args.input)?;
                spca_stream(&mut s as &mut dyn SampleStream, &u0, gamma, &options, &mut fc)?
            }
        };
        let objective = spca_objective(r.state.buffer(), &mut FlopCounter::new());
        let a = match &in_memory {
            Some(a) => a.clone(),
            None => DataMatrix::new(io::read_matrix_csv(&args.input, true)?)?,
        };
        let mut metrics = spca_metrics(
            "spca-stream",
            seed,
            &a,
            gamma,
            objective,
            &r.loadings,
            r.trace.iterations(),
            "StreamEnd".into(),
            fc.count(),
        );
        metrics.samples_consumed = Some(r.state.consumed());
        write_matrix_csv(&dir.join("loadings.csv"), &r.loadings.z)?;
        write_json(&dir.join("metrics.json"), &metrics)?;
        write_trace_tsv(&dir.join("trace.tsv"), &trace_rows(&r.trace))?;
        println!(
            "seed {seed}: objective {objective}, {} samples consumed, {fc}",
            r.state.consumed()
        );
        Ok(())
    })
}

#[derive(Debug, Serialize)]
struct TensorMetrics {
    schema_version: u32,
    command: &'static str,
    seed: u64,
    dim: usize,
    mode: &'static str,
    synthetic: bool,
    symmetrized: bool,
    max_asymmetry: f64,
    objective: f64,
    lambdas: Vec<f64>,
    null_directions: Vec<bool>,
    residual: f64,
    iterations: u64,
    stop: String,
    total_flops: u64,
}

pub fn cmd_tensor(args: &TensorArgs) -> i32 {
    exit_code(&run_tensor(args))
}

fn load_tensor(path: &Path) -> Result<(SymmetricTensor3, bool, f64)> {
    let (d, values) = io::read_tensor_file(path)?;
    match SymmetricTensor3::with_tolerance(d, values.clone(), FILE_SYMMETRY_TOLERANCE) {
        Ok(t) => {
            let asym = t.max_asymmetry();
            Ok((t, false, asym))
        }
        Err(Error::NotSymmetric { max_asymmetry }) => {
            eprintln!("warning: {} is not symmetric (max asymmetry {max_asymmetry:e}); symmetrizing", path.display());
            Ok((SymmetricTensor3::symmetrized(d, values)?, true, max_asymmetry))
        }
        Err(e) => Err(e),
    }
}

fn run_tensor(args: &TensorArgs) -> Result<()> {
    let from_file = match &args.input {
        Some(p) => Some(load_tensor(p)?),
        None => None,
    };
    repeat(&args.common, |seed, dir| {
        let (t, symmetrized, asym) = match (&from_file, &args.synth_lambdas) {
            (Some((t, s, a)), _) => (t.clone(), *s, *a),
            (None, Some(l)) => {
                let v = random_orthogonal(l.len(), seed)?;
                let t = synth_orthogonal_tensor(l, &v)?;
                write_tensor_file(&dir.join("tensor.txt"), &t)?;
                write_matrix_csv(&dir.join("true_factors.csv"), v.as_matrix())?;
                (t, false, 0.0)
            }
            (None, None) => return Err(Error::Config("need --input or --synth-lambdas".into())),
        };
        let d = t.dim();
        let mut stop = default_tensor_stop(d);
        if args.max_iters.is_some() || args.max_flops.is_some() {
            stop.max_iters = args.max_iters;
            stop.max_flops = args.max_flops;
        }
        if let Some(tol) = args.tol {
            stop.grad_tol = Some(finite("tol", tol)?);
        }
        let mut fc = FlopCounter::new();
        // the start point and the pair sequence use different streams of the same seed
        let u0 = random_orthogonal(d, seed.wrapping_add(0x5eed))?;
        let config = DescentConfig::new(stop, seed);
        let (dec, trace) = tensor_decompose(&t, u0, &config, args.mode.into(), &mut fc)?;
        let residual = decomposition_residual(&t, &dec);
        let objective = trace.final_objective();
        let metrics = TensorMetrics {
            schema_version: SCHEMA_VERSION,
            command: "tensor",
            seed,
            dim: d,
            mode: match args.mode {
                ModeArg::Naive => "naive",
                ModeArg::Accelerated => "accelerated",
            },
            synthetic: from_file.is_none(),
            symmetrized,
            max_asymmetry: asym,
            objective,
            lambdas: dec.lambdas.clone(),
            null_directions: dec.null.clone(),
            residual,
            iterations: trace.iterations(),
            stop: format!("{:?}", trace.stop),
            total_flops: fc.count(),
        };
        write_matrix_csv(
            &dir.join("lambdas.csv"),
            &nalgebra::DMatrix::from_column_slice(d, 1, &dec.lambdas),
        )?;
        write_matrix_csv(&dir.join("factors.csv"), dec.v.as_matrix())?;
        write_json(&dir.join("metrics.json"), &metrics)?;
        write_trace_tsv(&dir.join("trace.tsv"), &trace_rows(&trace))?;
        println!("seed {seed}: objective {objective}, residual {residual:e}, {fc}");
        Ok(())
    })
}

#[derive(Debug, Serialize)]
struct GmmModelOut {
    schema_version: u32,
    weights: Vec<f64>,
    /// One row per component.
    means: Vec<Vec<f64>>,
    sigma2: f64,
    lambdas: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct GmmMetrics {
    schema_version: u32,
    command: &'static str,
    seed: u64,
    dim: usize,
    components: usize,
    samples: usize,
    preset: Option<&'static str>,
    sigma2_hat: f64,
    conditioning_warning: bool,
    whitened_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    nmi: Option<f64>,
    total_flops: u64,
}

pub fn cmd_gmm(args: &GmmArgs) -> i32 {
    exit_code(&run_gmm(args))
}

fn run_gmm(args: &GmmArgs) -> Result<()> {
    let k = args.components;
    let loaded = match &args.input {
        Some(p) => Some(io::read_matrix_csv(p, args.transpose)?),
        None => None,
    };
    let dim = loaded.as_ref().map_or(args.dim, |m| m.nrows());
    if k == 0 || k > dim {
        return Err(Error::Config(format!("need 1 <= k <= D, got k = {k}, D = {dim}")));
    }
    repeat(&args.common, |seed, dir| {
        let (points, truth, preset) = match &loaded {
            Some(m) => (m.clone(), None, None),
            None => {
                if args.samples <= dim {
                    return Err(Error::InsufficientData {
                        needed: dim + 1,
                        available: args.samples,
                    });
                }
                let model = synth_model(args.preset.into(), dim, k, seed)?;
                let s = sample_gmm(&model, args.samples, seed.wrapping_add(1))?;
                let name = match args.preset {
                    PresetArg::Gaussian => "gaussian",
                    PresetArg::Separated => "separated",
                    PresetArg::InverseWishart => "inverse-wishart",
                };
                (s.points, Some(s.labels), Some(name))
            }
        };
        let mut fc = FlopCounter::new();
        let moments = estimate_moments(&points, k)?;
        let fit = fit_from_moments(&moments, k, seed.wrapping_add(2), args.mode.into(), &mut fc)?;
        let labels = cluster_assign(&points, &fit.model)?;
        let score = truth.as_ref().map(|t| nmi(&labels, t)).transpose()?;
        let model_out = GmmModelOut {
            schema_version: SCHEMA_VERSION,
            weights: fit.model.weights().to_vec(),
            means: fit
                .model
                .means()
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
            sigma2: fit.model.sigma2(),
            lambdas: fit.decomposition.lambdas.clone(),
        };
        let metrics = GmmMetrics {
            schema_version: SCHEMA_VERSION,
            command: "gmm",
            seed,
            dim,
            components: k,
            samples: points.ncols(),
            preset,
            sigma2_hat: moments.sigma2_hat,
            conditioning_warning: moments.conditioning_warning,
            whitened_residual: fit.residual,
            nmi: score,
            total_flops: fc.count(),
        };
        write_json(&dir.join("model.json"), &model_out)?;
        write_json(&dir.join("metrics.json"), &metrics)?;
        if let Some(trace) = &fit.trace {
            write_trace_tsv(&dir.join("trace.tsv"), &trace_rows(trace))?;
        }
        match score {
            Some(s) => println!("seed {seed}: NMI {s}"),
            None => println!("seed {seed}: fitted {k} components"),
        }
        Ok(())
    })
}
