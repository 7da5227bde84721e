//! Numerical checks of the moment-matching and span properties, and the
//! ADI and BPOD cross-checks.

pub mod adi;
pub mod bpod;
pub mod interpolation;
pub mod span;

pub use adi::{adi_iteration, compare_adi, AdiComparison};
pub use bpod::{bpod_embedding, bpod_tableau, bpod_trajectory, snapshot_gramian};
pub use interpolation::{verify_interpolation, InterpolationEntry, InterpolationReport};
pub use span::{composite_observable, jordan_structure, reference_basis, verify_span, JordanBlocks, SpanReport};
