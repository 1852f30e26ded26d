//! Location-informed interference-suppression precoding for distributed
//! massive MIMO.
//!
//! The crate models line-of-sight channels of distributed antenna arrays,
//! builds precoders that suppress interference towards other users from
//! their locations (or CSI), calibrates per-antenna phase offsets of
//! measured channels, and evaluates everything with a seeded Monte Carlo
//! engine.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod metrics;
pub mod precoders;
pub mod scenarios;

pub use error::{Error, ErrorClass, Result};
pub use geometry::{ArrayGeometry, LosChannelParams, Point3, Region};
pub use precoders::{ChannelMatrix, PrecoderEntry, PrecoderSpec, PrecodingMatrix};
pub use scenarios::{run_scenario, ScenarioConfig, ScenarioSummary};
