//! Parametrix construction for `∂_t + aΔ` on model manifolds with fibered
//! boundary, discretized on the collar chart.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below fix `f64`.

// `!(x > 0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fit;
pub mod geometry;
pub mod operators;
pub mod parametrix;
pub mod partition;
pub mod principle;
pub mod scalar;
pub mod semilinear;
pub mod spaces;

pub use error::{PhiError, Result};
pub use scalar::Real;

pub type ManifoldModel64 = geometry::ManifoldModel<f64>;
pub type Grid64 = geometry::Grid<f64>;
pub type SpaceTimeField64 = spaces::SpaceTimeField<f64>;
pub type NormSpec64 = spaces::NormSpec<f64>;
