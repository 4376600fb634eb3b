//! Streaming sparse PCA for `m < n`.
//!
//! A `d×m` buffer holds `A·U` for the samples currently retained. Each round
//! performs `L` Givens ascent steps on the buffer, then evicts the column
//! with the least norm and puts the next raw sample in its place. Memory is
//! `O(d·m)` no matter how long the stream is.

use nalgebra::{DMatrix, DVector};

use crate::manifold::{OrthogonalMatrix, PairSampler, Sense, StepRecord, DescentTrace, StopReason};
use crate::spca::{solve_for_z, spca_objective, spca_step, DataMatrix, SparseLoadings, SpcaState};
use crate::{Error, FlopCounter, Result};

/// Source of `d`-dimensional samples. Running out is `Ok(None)`, not an error.
pub trait SampleStream {
    fn dim(&self) -> usize;

    fn next_sample(&mut self) -> Result<Option<DVector<f64>>>;

    /// Samples handed out so far (since the last rewind).
    fn position(&self) -> usize;

    /// Restart from the first sample, for multi-epoch runs.
    fn rewind(&mut self) -> Result<()> {
        Err(Error::Config("this stream cannot be rewound".into()))
    }
}

/// Streams the columns of an in-memory data matrix.
#[derive(Debug, Clone)]
pub struct MatrixStream<'a> {
    data: &'a DMatrix<f64>,
    next: usize,
}

impl<'a> MatrixStream<'a> {
    pub fn new(data: &'a DataMatrix) -> Self {
        Self::from_matrix(data.as_matrix())
    }

    /// Columns of `data` are the samples.
    pub fn from_matrix(data: &'a DMatrix<f64>) -> Self {
        Self { data, next: 0 }
    }
}

impl SampleStream for MatrixStream<'_> {
    fn dim(&self) -> usize {
        self.data.nrows()
    }

    fn next_sample(&mut self) -> Result<Option<DVector<f64>>> {
        if self.next >= self.data.ncols() {
            return Ok(None);
        }
        let col = self.data.column(self.next).into_owned();
        self.next += 1;
        Ok(Some(col))
    }

    fn position(&self) -> usize {
        self.next
    }

    fn rewind(&mut self) -> Result<()> {
        self.next = 0;
        Ok(())
    }
}

/// Streaming solver state: the buffer plus the round bookkeeping.
#[derive(Debug, Clone)]
pub struct StreamState {
    buffer: SpcaState,
    inner_iters: usize,
    consumed: usize,
    sampler: Option<PairSampler>,
}

impl StreamState {
    pub fn buffer(&self) -> &SpcaState {
        &self.buffer
    }

    pub fn components(&self) -> usize {
        self.buffer.components()
    }

    /// Samples pulled from the stream, including the initial `m`.
    pub fn consumed(&self) -> usize {
        self.consumed
    }

    pub fn inner_iters(&self) -> usize {
        self.inner_iters
    }

    pub fn set_inner_iters(&mut self, l: usize) {
        self.inner_iters = l;
    }
}

fn pull<S: SampleStream + ?Sized>(stream: &mut S) -> Result<Option<DVector<f64>>> {
    let sample = stream.next_sample()?;
    if let Some(v) = &sample {
        if v.len() != stream.dim() {
            return Err(Error::Shape(format!(
                "sample {} has dimension {}, stream dimension is {}",
                stream.position(),
                v.len(),
                stream.dim()
            )));
        }
    }
    Ok(sample)
}

/// Fills the buffer with the first `m = U0.dim()` samples times `U0`.
///
/// Inner iterations default to `m`; pairs are drawn from a sampler seeded
/// with `seed`, the same one the batch solver would use.
pub fn stream_init<S: SampleStream + ?Sized>(
    stream: &mut S,
    u0: &OrthogonalMatrix,
    gamma: f64,
    seed: u64,
    fc: &mut FlopCounter,
) -> Result<StreamState> {
    let m = u0.dim();
    let d = stream.dim();
    let mut first = DMatrix::zeros(d, m);
    for k in 0..m {
        match pull(stream)? {
            Some(v) => first.set_column(k, &v),
            None => return Err(Error::InsufficientData { needed: m, available: k }),
        }
    }
    let au = first * u0.as_matrix();
    fc.add((d * m * (2 * m - 1)) as u64);
    let sampler = if m >= 2 { Some(PairSampler::new(m, seed)?) } else { None };
    Ok(StreamState {
        buffer: SpcaState::new(au, gamma)?,
        inner_iters: m,
        consumed: m,
        sampler,
    })
}

/// What a round did.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    /// One record per inner step; objectives are buffer values (maximize sense).
    pub steps: Vec<StepRecord>,
    /// Column replaced by the new sample, if one arrived.
    pub evicted: Option<usize>,
    pub exhausted: bool,
}

/// `L` ascent steps on the buffer, then evict-and-replace.
///
/// Step objectives are a running value: the buffer objective at the start
/// of the round plus the credited change of each step.
pub fn stream_round<S: SampleStream + ?Sized>(
    state: &mut StreamState,
    stream: &mut S,
    fc: &mut FlopCounter,
) -> Result<RoundReport> {
    let mut steps = Vec::with_capacity(state.inner_iters);
    if let Some(sampler) = state.sampler.as_mut() {
        let mut value = spca_objective(&state.buffer, &mut FlopCounter::new());
        for t in 0..state.inner_iters {
            let (i, j) = sampler.next_pair().expect("no pairs are ever stalled here");
            let out = spca_step(&mut state.buffer, i, j, fc)?;
            value += out.decrease();
            steps.push(StepRecord {
                iteration: t as u64 + 1,
                pair: Some((i, j)),
                theta: out.theta,
                objective: value,
                flops: fc.count(),
                grad_norm2: None,
                support: Some(state.buffer.support()),
            });
        }
    }
    let Some(sample) = pull(stream)? else {
        return Ok(RoundReport {
            steps,
            evicted: None,
            exhausted: true,
        });
    };
    let evicted = least_norm_column(state.buffer.au());
    state.buffer.column_mut(evicted).copy_from_slice(sample.as_slice());
    state.buffer.recount(evicted);
    state.consumed += 1;
    Ok(RoundReport {
        steps,
        evicted: Some(evicted),
        exhausted: false,
    })
}

/// Lowest index among the columns of least Euclidean norm.
fn least_norm_column(au: &DMatrix<f64>) -> usize {
    let mut best = 0;
    let mut best_norm = f64::INFINITY;
    for (k, c) in au.column_iter().enumerate() {
        let n = c.norm_squared();
        if n < best_norm {
            best = k;
            best_norm = n;
        }
    }
    best
}

/// Loadings from the current buffer.
pub fn stream_finalize(state: &StreamState) -> SparseLoadings {
    solve_for_z(state.buffer.au(), state.buffer.gamma())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamOptions {
    /// Inner iterations per round; `None` means `m`.
    pub inner_iters: Option<usize>,
    pub seed: u64,
    /// Stop once this many samples have been consumed in total.
    pub sample_budget: Option<usize>,
    /// Passes over the stream. Passes after the first rewind it.
    pub epochs: usize,
}

impl StreamOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            inner_iters: None,
            seed,
            sample_budget: None,
            epochs: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StreamResult {
    pub loadings: SparseLoadings,
    /// Per-step buffer objective, maximize sense. Replacement rows carry no
    /// pair; the objective jumps there, so only within-round monotonicity holds.
    pub trace: DescentTrace,
    pub state: StreamState,
}

/// Sample budget for an early-stop fraction of `n` samples: `round(frac·n)`.
pub fn early_stop_budget(frac: f64, n: usize) -> Result<usize> {
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(Error::Config(format!("early-stop fraction must be in (0, 1], got {frac}")));
    }
    Ok((frac * n as f64).round() as usize)
}

/// Runs the streaming solver to exhaustion (or budget), then finalizes.
pub fn spca_stream<S: SampleStream + ?Sized>(
    stream: &mut S,
    u0: &OrthogonalMatrix,
    gamma: f64,
    options: &StreamOptions,
    fc: &mut FlopCounter,
) -> Result<StreamResult> {
    if options.epochs == 0 {
        return Err(Error::Config("epoch count must be at least 1".into()));
    }
    let m = u0.dim();
    if let Some(b) = options.sample_budget {
        if b < m {
            return Err(Error::InsufficientData { needed: m, available: b });
        }
    }
    let mut state = stream_init(stream, u0, gamma, options.seed, fc)?;
    if let Some(l) = options.inner_iters {
        state.set_inner_iters(l);
    }
    let mut records = vec![StepRecord {
        iteration: 0,
        pair: None,
        theta: 0.0,
        objective: spca_objective(&state.buffer, &mut FlopCounter::new()),
        flops: fc.count(),
        grad_norm2: None,
        support: Some(state.buffer.support()),
    }];
    let mut epoch = 1;
    let mut iteration = 0u64;
    loop {
        let budget_left = options.sample_budget.is_none_or(|b| state.consumed < b);
        let report = if budget_left {
            stream_round(&mut state, stream, fc)?
        } else {
            // budget spent: one last round of rotations, no new sample
            stream_round(&mut state, &mut Exhausted(stream.dim()), fc)?
        };
        for mut r in report.steps {
            iteration += 1;
            r.iteration = iteration;
            records.push(r);
        }
        if report.evicted.is_some() {
            iteration += 1;
            records.push(StepRecord {
                iteration,
                pair: None,
                theta: 0.0,
                objective: spca_objective(&state.buffer, &mut FlopCounter::new()),
                flops: fc.count(),
                grad_norm2: None,
                support: Some(state.buffer.support()),
            });
        }
        if report.exhausted {
            if !budget_left || epoch >= options.epochs {
                break;
            }
            epoch += 1;
            stream.rewind()?;
        }
    }
    let loadings = stream_finalize(&state);
    Ok(StreamResult {
        loadings,
        trace: DescentTrace {
            sense: Sense::Maximize,
            records,
            stop: StopReason::External,
        },
        state,
    })
}

struct Exhausted(usize);

impl SampleStream for Exhausted {
    fn dim(&self) -> usize {
        self.0
    }
    fn next_sample(&mut self) -> Result<Option<DVector<f64>>> {
        Ok(None)
    }
    fn position(&self) -> usize {
        0
    }
}
