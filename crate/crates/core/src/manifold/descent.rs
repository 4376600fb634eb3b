//! Randomized Riemannian coordinate minimization.
//!
//! Each iteration samples a pair `(i, j)`, minimizes the restriction
//! `g(θ) = f(U·G(i, j, θ))` exactly (closed form when the objective has one,
//! otherwise [`line_minimize_periodic`]) and applies the winning rotation.

use std::f64::consts::{PI, TAU};

use super::givens::GivensRotation;
use super::linesearch::{line_minimize_periodic, wrap_angle, LINE_SEARCH_TOL, TIE_RELATIVE};
use super::random::PairSampler;
use super::skew::SkewCoefficients;
use crate::{Error, FlopCounter, Result};

/// Central finite-difference step for [`Restriction::derivative_at_zero`].
pub const FD_STEP: f64 = 1e-5;

/// `|g′(0)|` at or below this counts as a stationary coordinate.
const STATIONARY_DERIVATIVE: f64 = 1e-12;

/// One-variable, 2π-periodic restriction of an objective to a coordinate pair.
pub trait Restriction {
    /// `g(θ)`; reports its arithmetic to `fc`.
    fn value(&self, theta: f64, fc: &mut FlopCounter) -> f64;

    /// Closed-form global minimizer in `[−π, π)`, if the objective has one.
    fn minimizer(&self, _fc: &mut FlopCounter) -> Option<f64> {
        None
    }

    /// `g′(0)`. Central difference with step [`FD_STEP`] unless overridden.
    fn derivative_at_zero(&self, fc: &mut FlopCounter) -> f64 {
        let plus = self.value(FD_STEP, fc);
        let minus = self.value(-FD_STEP, fc);
        fc.add(3);
        (plus - minus) / (2.0 * FD_STEP)
    }
}

/// An objective over a state that moves by Givens rotations of its columns.
///
/// The state is usually `U` itself, but may be anything that transforms
/// covariantly under `U ↦ U·G` (sparse PCA keeps `A·U`, the tensor solver
/// keeps contracted tensors).
pub trait CoordinateObjective {
    type State;
    type Restriction: Restriction;

    /// Number of columns that rotations act on.
    fn coordinates(&self, state: &Self::State) -> usize;

    fn eval(&self, state: &Self::State, fc: &mut FlopCounter) -> f64;

    fn restrict(&self, state: &Self::State, i: usize, j: usize, fc: &mut FlopCounter) -> Self::Restriction;

    /// Applies `G(i, j, θ)` to the state.
    fn apply(&self, state: &mut Self::State, rotation: &GivensRotation, fc: &mut FlopCounter);

    /// The state-only term `c` with `eval(state) = g(0) + c`.
    fn restricted_constant(&self, state: &Self::State, i: usize, j: usize) -> f64 {
        let mut scratch = FlopCounter::new();
        let total = self.eval(state, &mut scratch);
        total - self.restrict(state, i, j, &mut scratch).value(0.0, &mut scratch)
    }

    /// Riemannian gradient coefficients, one directional derivative per pair.
    fn gradient(&self, state: &Self::State, fc: &mut FlopCounter) -> SkewCoefficients {
        let d = self.coordinates(state);
        let mut grad = SkewCoefficients::zeros(d);
        for i in 0..d {
            for j in i + 1..d {
                let r = self.restrict(state, i, j, fc);
                grad.set(i, j, r.derivative_at_zero(fc));
            }
        }
        grad
    }

    /// Optional support size reported in traces (sparse PCA non-zeros).
    fn support(&self, _state: &Self::State) -> Option<usize> {
        None
    }
}

/// `dg/dθ` at `θ = 0` for the restriction to `(i, j)`.
pub fn directional_derivative<O: CoordinateObjective>(
    obj: &O,
    state: &O::State,
    i: usize,
    j: usize,
    fc: &mut FlopCounter,
) -> f64 {
    obj.restrict(state, i, j, fc).derivative_at_zero(fc)
}

pub fn riemannian_gradient<O: CoordinateObjective>(
    obj: &O,
    state: &O::State,
    fc: &mut FlopCounter,
) -> SkewCoefficients {
    obj.gradient(state, fc)
}

/// Empirical Lipschitz constant of `g′`: the largest `|g″|` over a uniform
/// grid of `points` angles, refined by golden-section search around the
/// best grid point. Second derivatives come from central differences.
pub fn curvature_bound<R: Restriction>(r: &R, points: usize) -> f64 {
    const STEP: f64 = 1e-4;
    let mut fc = FlopCounter::new();
    let mut curvature = |t: f64| {
        let plus = r.value(t + STEP, &mut fc);
        let mid = r.value(t, &mut fc);
        let minus = r.value(t - STEP, &mut fc);
        ((plus - 2.0 * mid + minus) / (STEP * STEP)).abs()
    };
    let h = TAU / points as f64;
    let (mut best_t, mut best) = (-PI, f64::NEG_INFINITY);
    for k in 0..points {
        let t = -PI + k as f64 * h;
        let c = curvature(t);
        if c > best {
            best = c;
            best_t = t;
        }
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (best_t - h, best_t + h);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = curvature(x1);
    let mut f2 = curvature(x2);
    for _ in 0..40 {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = curvature(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = curvature(x2);
        }
    }
    best.max(f1).max(f2)
}

/// When to stop. At least one of `max_iters` / `max_flops` must be set.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StoppingRule {
    pub max_iters: Option<u64>,
    pub max_flops: Option<u64>,
    /// Relative objective change over a window of `d(d−1)/2` iterations.
    pub rel_tol: Option<f64>,
    /// Riemannian gradient norm, checked at the start and once per window.
    pub grad_tol: Option<f64>,
}

impl StoppingRule {
    pub fn iterations(n: u64) -> Self {
        Self {
            max_iters: Some(n),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters.is_none() && self.max_flops.is_none() {
            return Err(Error::Config(
                "stopping rule needs an iteration or flop cap".into(),
            ));
        }
        if let Some(t) = self.rel_tol {
            if !(t >= 0.0) {
                return Err(Error::Config(format!("relative tolerance must be >= 0, got {t}")));
            }
        }
        if let Some(t) = self.grad_tol {
            if !(t >= 0.0) {
                return Err(Error::Config(format!("gradient tolerance must be >= 0, got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentConfig {
    pub stop: StoppingRule,
    pub seed: u64,
    /// Resample among untried pairs when a pair is stationary and yields no
    /// improvement; stop once every pair is stationary.
    pub resample_stalled: bool,
    /// Record `‖∇f‖²` in the trace every this many iterations.
    pub grad_every: Option<u64>,
    pub line_tol: f64,
}

impl DescentConfig {
    pub fn new(stop: StoppingRule, seed: u64) -> Self {
        Self {
            stop,
            seed,
            resample_stalled: false,
            grad_every: None,
            line_tol: LINE_SEARCH_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    MaxFlops,
    RelativeChange,
    GradientNorm,
    AllCoordinatesStationary,
    /// The caller drove the iteration itself.
    External,
}

/// One row of a trace. Row 0 describes the initial point and has no pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub iteration: u64,
    pub pair: Option<(usize, usize)>,
    pub theta: f64,
    pub objective: f64,
    pub flops: u64,
    pub grad_norm2: Option<f64>,
    pub support: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentTrace {
    pub sense: Sense,
    pub records: Vec<StepRecord>,
    pub stop: StopReason,
}

impl DescentTrace {
    /// Same run reported for the opposite sense: objectives negated.
    pub fn negated(mut self) -> Self {
        self.sense = match self.sense {
            Sense::Minimize => Sense::Maximize,
            Sense::Maximize => Sense::Minimize,
        };
        for r in &mut self.records {
            r.objective = -r.objective;
        }
        self
    }

    pub fn iterations(&self) -> u64 {
        self.records.last().map_or(0, |r| r.iteration)
    }

    pub fn initial_objective(&self) -> f64 {
        self.records[0].objective
    }

    pub fn final_objective(&self) -> f64 {
        self.records.last().expect("trace has an initial record").objective
    }

    /// Non-increasing (minimize) or non-decreasing (maximize) up to `slack`.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.records.windows(2).all(|w| match self.sense {
            Sense::Minimize => w[1].objective <= w[0].objective + slack,
            Sense::Maximize => w[1].objective >= w[0].objective - slack,
        })
    }

    pub fn thetas(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().skip(1).map(|r| r.theta)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.records.iter().filter_map(|r| r.pair)
    }
}

/// What one coordinate step did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub i: usize,
    pub j: usize,
    pub theta: f64,
    /// `g(0)`, the objective restricted to the pair before the step.
    pub before: f64,
    /// `g(θ)` at the chosen angle.
    pub after: f64,
    /// `g′(0)` when it was computed (resampling variant only).
    pub derivative: Option<f64>,
}

impl StepOutcome {
    /// Decrease credited to the step; changes inside the tie band count as 0.
    pub fn decrease(&self) -> f64 {
        (self.before - self.after).max(0.0)
    }
}

/// Exact minimization of one restriction: closed form when available,
/// otherwise the periodic line search. Returns `(θ, g(θ), g(0))`.
///
/// A closed-form answer that is worse than `θ = 0` beyond the tie band is
/// replaced by `θ = 0`.
pub fn exact_step<R: Restriction>(r: &R, line_tol: f64, fc: &mut FlopCounter) -> Result<(f64, f64, f64)> {
    let (mut theta, mut after, before) = match r.minimizer(fc) {
        Some(t) => {
            let t = wrap_angle(t);
            (t, r.value(t, fc), r.value(0.0, fc))
        }
        None => {
            let m = line_minimize_periodic(|t| r.value(t, fc), line_tol)?;
            (m.theta, m.value, m.value_at_zero)
        }
    };
    if !after.is_finite() || !before.is_finite() {
        return Err(Error::NonFinite { theta });
    }
    let tie = TIE_RELATIVE * before.abs().max(after.abs());
    if after > before + tie {
        theta = 0.0;
        after = before;
    }
    Ok((theta, after, before))
}

/// Stepwise driver. [`coordinate_minimize`] runs it to completion; tests and
/// diagnostics can call [`CoordinateDescent::step_pair`] directly.
pub struct CoordinateDescent<'a, O: CoordinateObjective> {
    obj: &'a O,
    state: O::State,
    value: f64,
    line_tol: f64,
    resample_stalled: bool,
}

impl<'a, O: CoordinateObjective> CoordinateDescent<'a, O> {
    /// The initial objective is evaluated off the books: it is bookkeeping,
    /// not solver work.
    pub fn new(obj: &'a O, state: O::State) -> Self {
        let value = obj.eval(&state, &mut FlopCounter::new());
        Self {
            obj,
            state,
            value,
            line_tol: LINE_SEARCH_TOL,
            resample_stalled: false,
        }
    }

    pub fn with_line_tol(mut self, tol: f64) -> Self {
        self.line_tol = tol;
        self
    }

    pub fn state(&self) -> &O::State {
        &self.state
    }

    pub fn into_state(self) -> O::State {
        self.state
    }

    /// Running objective: initial value plus every credited step change.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// Minimizes over `θ` for the pair `(i, j)` and applies the rotation.
    pub fn step_pair(&mut self, i: usize, j: usize, fc: &mut FlopCounter) -> Result<StepOutcome> {
        let d = self.obj.coordinates(&self.state);
        if i >= j || j >= d {
            return Err(Error::InvalidCoordinate { i, j, dim: d });
        }
        let r = self.obj.restrict(&self.state, i, j, fc);
        let derivative = self.resample_stalled.then(|| r.derivative_at_zero(fc));
        let (theta, after, before) = exact_step(&r, self.line_tol, fc)?;
        self.value += (after - before).min(0.0);
        let rotation = GivensRotation::new_unchecked(i, j, theta);
        self.obj.apply(&mut self.state, &rotation, fc);
        Ok(StepOutcome {
            i,
            j,
            theta,
            before,
            after,
            derivative,
        })
    }
}

/// Runs randomized coordinate minimization from `state` until `config.stop`.
///
/// Pairs are drawn uniformly with replacement. With
/// `config.resample_stalled`, a pair whose `|g′(0)| ≤ 1e−12` produced no
/// improvement is excluded until some later step improves; if every pair is
/// excluded the run stops as converged.
pub fn coordinate_minimize<O: CoordinateObjective>(
    obj: &O,
    state: O::State,
    config: &DescentConfig,
    fc: &mut FlopCounter,
) -> Result<(O::State, DescentTrace)> {
    config.stop.validate()?;
    let d = obj.coordinates(&state);
    let mut sampler = PairSampler::new(d, config.seed)?;
    let window = sampler.pair_count() as u64;
    let mut driver = CoordinateDescent::new(obj, state).with_line_tol(config.line_tol);
    driver.resample_stalled = config.resample_stalled;

    let monitor = |driver: &CoordinateDescent<'_, O>| -> f64 {
        obj.gradient(&driver.state, &mut FlopCounter::new()).norm_squared()
    };

    let mut initial_grad = None;
    if config.grad_every.is_some() || config.stop.grad_tol.is_some() {
        initial_grad = Some(monitor(&driver));
    }
    let mut records = vec![StepRecord {
        iteration: 0,
        pair: None,
        theta: 0.0,
        objective: driver.value,
        flops: fc.count(),
        grad_norm2: initial_grad,
        support: obj.support(&driver.state),
    }];

    let grad_stop = |g2: Option<f64>| match (config.stop.grad_tol, g2) {
        (Some(tol), Some(g2)) => g2.sqrt() <= tol,
        _ => false,
    };
    if grad_stop(initial_grad) {
        return Ok((
            driver.state,
            DescentTrace {
                sense: Sense::Minimize,
                records,
                stop: StopReason::GradientNorm,
            },
        ));
    }

    let mut t: u64 = 0;
    let stop = loop {
        if config.stop.max_iters.is_some_and(|m| t >= m) {
            break StopReason::MaxIterations;
        }
        if config.stop.max_flops.is_some_and(|m| fc.count() >= m) {
            break StopReason::MaxFlops;
        }
        let Some((i, j)) = sampler.next_pair() else {
            break StopReason::AllCoordinatesStationary;
        };
        let outcome = driver.step_pair(i, j, fc)?;
        t += 1;

        if config.resample_stalled {
            let stationary = outcome
                .derivative
                .is_some_and(|g| g.abs() <= STATIONARY_DERIVATIVE);
            if stationary && outcome.decrease() == 0.0 {
                sampler.mark_stalled(i, j);
            } else if outcome.decrease() > 0.0 {
                sampler.clear_stalled();
            }
        }

        let sample_grad = config.grad_every.is_some_and(|k| k > 0 && t % k == 0);
        let check_grad = config.stop.grad_tol.is_some() && t % window == 0;
        let grad_norm2 = (sample_grad || check_grad).then(|| monitor(&driver));
        records.push(StepRecord {
            iteration: t,
            pair: Some((i, j)),
            theta: outcome.theta,
            objective: driver.value,
            flops: fc.count(),
            grad_norm2,
            support: obj.support(&driver.state),
        });

        if check_grad && grad_stop(grad_norm2) {
            break StopReason::GradientNorm;
        }
        if let Some(tol) = config.stop.rel_tol {
            if t >= window {
                let old = records[(t - window) as usize].objective;
                let scale = driver.value.abs().max(old.abs()).max(f64::MIN_POSITIVE);
                if (old - driver.value).abs() <= tol * scale {
                    break StopReason::RelativeChange;
                }
            }
        }
        if config.resample_stalled && sampler.all_stalled() {
            break StopReason::AllCoordinatesStationary;
        }
    };

    Ok((
        driver.state,
        DescentTrace {
            sense: Sense::Minimize,
            records,
            stop,
        },
    ))
}
