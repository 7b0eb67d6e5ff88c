//! Label-free run-time selection of object detectors for real-time video
//! analytics.
//!
//! Running a detector pool on a live stream poses a moving trade-off: heavy
//! detectors see more (especially small objects) but their latency forces
//! more frames to be dropped, and stale boxes copied onto dropped frames go
//! bad at a rate set by how fast the scene moves. This crate estimates, at
//! run time and without any labels, the average precision of every detector
//! in a pool *relative to the one currently running*, from three observables:
//! the size histogram of the boxes just detected, their overlap with the
//! previous analyzed frame, and the measured detection latency.
//!
//! The crate also ships everything needed to study such policies offline:
//!
//! - [`trace`]: detection traces standing in for live detectors, MOT CSV
//!   ingestion, and latency sidecars.
//! - [`geometry`]: IoU, survival counting, and object-size histograms.
//! - [`prior`]: the offline per-size-region detection prior and the ratios
//!   that extrapolate live counts across the pool.
//! - [`estimator`]: latency tracking, frame-block sizing, the degradation
//!   recursion, and relative-AP scoring.
//! - [`policy`]: the estimator-backed policy plus static, median-object-size
//!   (TOD) and latency-threshold (LAD) baselines.
//! - [`simulator`]: deterministic real-time replay with frame drops and
//!   piecewise background-workload schedules.
//! - [`evaluation`]: greedy matching, 11-point interpolated AP, and
//!   real-time AP over a replay.
//! - [`synthetic`]: seeded scenario generation used as the test oracle.
//! - [`config`] / [`experiment`]: the TOML experiment schema and the sweep
//!   runner behind the command-line tool.
//!
//! ```
//! use roma::estimator::frame_block_size;
//!
//! // At 30 frames per second, a 225 ms detector occupies the analyzed frame
//! // plus six dropped ones.
//! assert_eq!(frame_block_size(30.0, 0.225), 7);
//! ```

pub mod config;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod experiment;
pub mod geometry;
pub mod policy;
pub mod prior;
pub mod simulator;
pub mod synthetic;
pub mod trace;

pub mod guide;

pub use error::{Error, Result};
