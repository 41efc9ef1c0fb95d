//! Space-time grid functions and sampled weighted parabolic Hölder norms.

mod derivative;
mod field;
mod holder;

pub use derivative::{phi_derivative, time_derivative};
pub use field::{uniform_times, SpaceTimeField};
pub use holder::{alpha_seminorm, alpha_seminorm_with_pair, k_alpha_norm, sup_norm, HolderReport, NormSpec, SamplePair};
