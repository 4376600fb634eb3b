//! The orthogonal group as an optimization domain.
//!
//! [`OrthogonalMatrix`] is the variable, [`GivensRotation`] the coordinate
//! step, and [`coordinate_minimize`] the randomized coordinate minimization
//! driver. Objectives plug in through [`CoordinateObjective`], which exposes
//! the one-variable restriction `g(θ) = f(U·G(i, j, θ))` for a pair `(i, j)`.

mod brockett;
mod descent;
mod givens;
mod linesearch;
mod orthogonal;
mod random;
pub(crate) use random::random_orthogonal_with;
mod skew;

pub use brockett::{BrockettObjective, BrockettRestriction, FnObjective, FnRestriction};
pub use descent::{
    coordinate_minimize, curvature_bound, directional_derivative, exact_step, riemannian_gradient,
    CoordinateDescent, CoordinateObjective, DescentConfig, DescentTrace, Restriction, Sense,
    StepOutcome, StepRecord, StopReason, StoppingRule, FD_STEP,
};
pub use givens::{make_givens, rotate_columns, rotate_slices, GivensRotation};
pub use linesearch::{
    line_minimize_periodic, wrap_angle, LineMinimum, LINE_SEARCH_GRID, LINE_SEARCH_TOL,
    TIE_RELATIVE,
};
pub use orthogonal::{orthogonality_defect, OrthogonalMatrix, ORTHOGONALITY_TOLERANCE};
pub use random::{random_orthogonal, seeded_rng, PairSampler};
pub use skew::SkewCoefficients;
