//! Space-time optimal control solves and partitioned DMDc surrogates.
//!
//! The crate is organised bottom-up:
//!
//! * [`snapshots`]: snapshot matrices, splitting, normalization and file I/O.
//! * [`numerics`]: truncated SVD, dense eigen-decomposition, sparse direct solves.
//! * [`dmdc`]: Dynamic Mode Decomposition with control (fit, advance, rollout).
//! * [`ocp`]: finite-difference parabolic control problems and their
//!   all-at-once KKT solve.
//! * [`partitioned`]: separate state/adjoint surrogates with control recovery.
//! * [`metrics`]: relative errors, train-size sweeps and timing reports.
//! * [`pipeline`]: manifest-driven end-to-end runs.

pub mod dmdc;
pub mod error;
pub mod metrics;
pub mod numerics;
pub mod ocp;
pub mod partitioned;
pub mod pipeline;
pub mod snapshots;

pub use dmdc::{DmdcModel, FitOptions, InputMatrix};
pub use error::{Error, Result};
pub use faer::{c64, Mat, MatRef};
pub use metrics::{ErrorCurve, TimingReport};
pub use numerics::{RankRule, SparseMatrix};
pub use ocp::{OcpSolution, ParabolicOcpConfig};
pub use partitioned::{InputSource, PartitionedModel, TimeDirection, TrainConfig, Trajectories};
pub use pipeline::{PipelineManifest, PipelineSettings};
pub use snapshots::{NormalizationRecord, ShiftPair, SnapshotMatrix};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
