//! Discrete Laplacian, θ-scheme propagators, Duhamel convolution and
//! closed-form heat-kernel oracles.

mod coefficient;
mod laplacian;
mod oracle;
mod propagator;
mod solver;

pub use coefficient::CoefficientField;
pub use laplacian::{assemble_laplacian, DiscreteOperator};
#[allow(unused_imports)]
pub(crate) use laplacian::RowProfile;
pub use propagator::{consistency_residual, frozen_propagator, heat_convolve, heat_propagate, scheme_residual, Propagator};
pub use solver::ShiftedSolver;
pub use oracle::{annulus_leakage, circle_kernel, mass_report, oracle_check, oracle_kernel, planar_kernel, BlobSpec, OracleRow};
