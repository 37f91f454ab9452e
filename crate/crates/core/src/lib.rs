//! Data-efficiency laboratory for streaming click-through-rate models.
//!
//! The crate simulates a chronologically ordered click stream with drift
//! ([`datagen`]), trains small hashed CTR models on it in a single
//! sequential pass followed by an online phase ([`harness`]), and layers the
//! data-reduction mechanisms on top:
//!
//! * negative downsampling with inverse-rate importance weights, applied
//!   either continuously or up to a cutoff ([`sampling`]);
//! * teacher/student distillation with cutover or continuous schedules
//!   ([`distill`]);
//! * baseline-relative convergence detection and start-date pruning
//!   ([`harness`]);
//! * iso-compute sweeps trading model size against kept examples
//!   ([`sweep`]).
//!
//! Everything is deterministic given a seed: randomness comes from a keyed,
//! counter-based generator ([`rng`]) so unrelated components never perturb
//! each other's draws.

pub mod datagen;
pub mod distill;
pub mod error;
pub mod example;
pub mod harness;
pub mod hashing;
pub mod model;
pub mod oracle;
pub mod output;
pub mod rng;
pub mod sampling;
pub mod sweep;

pub use datagen::{GroundTruth, StreamSpec};
pub use distill::{DistillPolicy, DistillSchedule, TeacherSpec, TeacherTrack};
pub use error::{Error, Result};
pub use example::{Example, Feature};
pub use harness::{CostModel, RunRecord, TrialConfig, WindowRow};
pub use hashing::{hash_feature, HashConfig};
pub use model::{Arch, CtrModel, OptimizerConfig};
pub use rng::Rng;
pub use sampling::{SamplerPolicy, SamplerState, Schedule, Signal};
pub use sweep::{IsoComputeSpec, SweepResult};
