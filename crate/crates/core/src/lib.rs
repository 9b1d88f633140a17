//! Storage cost modeling for multi-queue SSDs.
//!
//! The crate is organised around four throughput models (DAM, PDAM, Affine
//! and the concurrency-aware MQSSD model), a calibration pipeline that
//! derives their parameters from benchmark trials, a file I/O benchmark
//! harness, a deterministic synthetic device used as a ground-truth oracle,
//! and an LSM-tree analyzer that applies a calibrated profile to compaction,
//! query and scan costs.

pub mod bench;
pub mod calibration;
pub mod compare;
pub mod error;
pub mod lsm;
pub mod models;
pub mod oracle;
pub mod predict;
pub mod rational;
mod seed;
pub mod stats;

pub use error::{Error, Result, SchemaIssue};
pub use models::{
    AffineCosts, AffineParams, DamParams, DeviceProfile, ModelKind, MqssdProfile, OpKind,
    PageGeometry, PdamParams, Provenance,
};
pub use rational::RationalFn;
