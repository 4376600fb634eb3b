//! Coordinate minimization on the orthogonal group `O(d)` by Givens rotations.
//!
//! Each iteration picks a coordinate pair `(i, j)`, minimizes the objective
//! exactly along the one-parameter rotation `U ↦ U·G(i, j, θ)`, and applies
//! the rotation to two columns in `6d` flops. Nothing is ever
//! re-orthogonalized; iterates stay on the manifold up to rounding.
//!
//! Built on the generic driver in [`manifold`]:
//!
//! - [`spca`]: sparse PCA in the full case, one rotation coordinate per
//!   sample pair.
//! - [`streaming`]: the same objective over a fixed-size buffer of columns
//!   fed from a sample stream.
//! - [`tensor`]: orthogonal decomposition of symmetric third-order tensors
//!   with a closed-form restricted objective and an `O(d²)` per-step mode.
//! - [`gmm`]: spherical Gaussian mixture recovery from third moments, scored
//!   by normalized mutual information.
//! - [`cli`]: the `givens` command-line harness and its file formats.
//!
//! Every solver reports its arithmetic work through a [`FlopCounter`].

pub mod cli;
pub mod error;
pub mod flops;
pub mod gmm;
pub mod manifold;
pub mod spca;
pub mod streaming;
pub mod tensor;

pub use error::{Error, Result};
pub use flops::FlopCounter;
pub use manifold::{
    coordinate_minimize, make_givens, orthogonality_defect, random_orthogonal, rotate_columns,
    CoordinateObjective, DescentConfig, DescentTrace, GivensRotation, OrthogonalMatrix,
    StoppingRule,
};
