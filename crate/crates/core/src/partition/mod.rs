//! ε-scaled bump families, partitions of unity near the boundary, and their
//! audit.

mod audit;
mod family;
mod profile;

pub use family::{collar_cutoff, normalize, normalize_fields, phi_total, raw_bumps, raw_pair_at, Anchor, AnchorGroup, BumpFamily, PartitionConfig};
pub use audit::{audit, audit_report, diameter_constant, seminorm_scaling, PartitionAudit};
pub use profile::{sigma, sigma_prime, smoothstep};
pub(crate) use profile::sigma_unchecked;
