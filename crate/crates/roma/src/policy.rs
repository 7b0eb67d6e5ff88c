//! Per-step detector selection policies.
//!
//! A policy sees only label-free run-time observables — the boxes detected on
//! the current and previous analyzed frames and the measured latency — and
//! names the detector for the next analyzed frame. Four implementations:
//! the RAP estimator, a fixed detector, median-object-size mapping (TOD),
//! and latency-threshold stepping (LAD).

use crate::error::{Error, Result};
use crate::estimator::{Estimator, StepTelemetry};
use crate::geometry::{size_region, RegionBoundaries};
use crate::prior::PriorModel;
use crate::trace::{FrameDetections, VideoMeta};

/// What a policy observes at one analyzed frame.
#[derive(Debug, Clone, Copy)]
pub struct PolicyInput<'a> {
    pub analyzed_frame_index: usize,
    pub current_detector: usize,
    /// Confidence-filtered detections on the current analyzed frame.
    pub detections_now: &'a FrameDetections,
    /// Detections on the previous analyzed frame; `None` on the first.
    pub detections_prev: Option<&'a FrameDetections>,
    /// Wall-clock cost of analyzing this frame, in seconds.
    pub measured_latency: f64,
    pub fps: f64,
    pub meta: &'a VideoMeta,
}

/// A policy's verdict for the next analyzed frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyDecision {
    pub next_detector: usize,
    /// Decision-making cost in seconds, charged to this frame's latency.
    pub overhead: f64,
}

/// A per-stream decision procedure. Deterministic given its inputs and
/// internal state; one instance per simulated stream.
pub trait Policy {
    fn name(&self) -> &str;

    /// Detector that analyzes frame 0.
    fn initial_detector(&self) -> usize;

    /// Decision cost for a frame with these detections, known before the
    /// step runs so the simulator can fold it into the frame's latency.
    fn decision_overhead(&self, detections_now: &FrameDetections) -> f64 {
        let _ = detections_now;
        0.0
    }

    fn step(&mut self, input: &PolicyInput<'_>) -> PolicyDecision;

    /// Estimator internals of the most recent step, when the policy has any.
    fn last_telemetry(&self) -> Option<&StepTelemetry> {
        None
    }
}

/// Decision cost model: quadratic in the number of detected objects, since
/// the survival count compares every pair of boxes across two frames.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OverheadModel {
    /// Seconds per squared detection count. 0 disables the overhead.
    pub kappa: f64,
}

impl OverheadModel {
    /// Roughly 6 ms at 40 detections.
    pub const CALIBRATED_KAPPA: f64 = 3.75e-6;

    pub fn cost(&self, detections: usize) -> f64 {
        self.kappa * (detections * detections) as f64
    }
}

/// The RAP-driven policy: runs the full estimator step and picks the argmax.
#[derive(Debug, Clone)]
pub struct RomaPolicy {
    estimator: Estimator,
    overhead: OverheadModel,
    last: Option<StepTelemetry>,
}

impl RomaPolicy {
    pub fn new(
        prior: PriorModel,
        initial_latencies: Vec<f64>,
        fps: f64,
        survival_iou: f64,
        overhead: OverheadModel,
    ) -> Result<Self> {
        let estimator = Estimator::new(prior, initial_latencies, fps, survival_iou)?;
        Ok(RomaPolicy {
            estimator,
            overhead,
            last: None,
        })
    }

    pub fn estimator(&self) -> &Estimator {
        &self.estimator
    }
}

impl Policy for RomaPolicy {
    fn name(&self) -> &str {
        "roma"
    }

    fn initial_detector(&self) -> usize {
        self.estimator.current_detector()
    }

    fn decision_overhead(&self, detections_now: &FrameDetections) -> f64 {
        self.overhead.cost(detections_now.boxes.len())
    }

    fn step(&mut self, input: &PolicyInput<'_>) -> PolicyDecision {
        debug_assert_eq!(input.current_detector, self.estimator.current_detector());
        let telemetry = self
            .estimator
            .step(input.detections_now, input.meta, input.measured_latency)
            .expect("measured latency is positive in a valid simulation");
        let next = telemetry.chosen;
        let overhead = self.overhead.cost(input.detections_now.boxes.len());
        self.last = Some(telemetry);
        PolicyDecision {
            next_detector: next,
            overhead,
        }
    }

    fn last_telemetry(&self) -> Option<&StepTelemetry> {
        self.last.as_ref()
    }
}

/// Always the same detector.
#[derive(Debug, Clone)]
pub struct StaticPolicy {
    detector: usize,
    name: String,
}

impl StaticPolicy {
    pub fn new(detector: usize, pool_size: usize, name: impl Into<String>) -> Result<Self> {
        if detector >= pool_size {
            return Err(Error::config(format!(
                "static policy detector {detector} out of range for a pool of {pool_size}"
            )));
        }
        Ok(StaticPolicy {
            detector,
            name: name.into(),
        })
    }
}

impl Policy for StaticPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn initial_detector(&self) -> usize {
        self.detector
    }

    fn step(&mut self, _input: &PolicyInput<'_>) -> PolicyDecision {
        PolicyDecision {
            next_detector: self.detector,
            overhead: 0.0,
        }
    }
}

/// Picks the detector mapped to the median detected-object size region of
/// the current frame; an empty frame keeps the current detector.
#[derive(Debug, Clone)]
pub struct TodPolicy {
    boundaries: RegionBoundaries,
    region_to_detector: Vec<usize>,
    initial: usize,
}

impl TodPolicy {
    pub fn new(
        boundaries: RegionBoundaries,
        region_to_detector: Vec<usize>,
        pool_size: usize,
        initial: usize,
    ) -> Result<Self> {
        if region_to_detector.len() != boundaries.region_count() {
            return Err(Error::config("TOD needs one detector per size region"));
        }
        if region_to_detector.iter().any(|d| *d >= pool_size) || initial >= pool_size {
            return Err(Error::config("TOD detector index out of range"));
        }
        Ok(TodPolicy {
            boundaries,
            region_to_detector,
            initial,
        })
    }

    /// Default mapping: the smallest size region gets the heaviest detector,
    /// the largest gets the lightest, intermediate regions interpolate along
    /// the latency ladder. Starts on the heaviest detector.
    pub fn with_default_mapping(boundaries: RegionBoundaries, order: &[usize]) -> Result<Self> {
        let regions = boundaries.region_count();
        let n = order.len();
        if n == 0 {
            return Err(Error::config("TOD needs a non-empty detector pool"));
        }
        let map = (0..regions)
            .map(|k| {
                let rank = if regions == 1 {
                    n - 1
                } else {
                    (((regions - 1 - k) * (n - 1)) as f64 / (regions - 1) as f64).round() as usize
                };
                order[rank]
            })
            .collect();
        let initial = *order.last().expect("order is non-empty");
        TodPolicy::new(boundaries, map, n, initial)
    }
}

/// Median of box areas: middle element for odd counts, mean of the two
/// middle elements for even counts.
fn median_area(dets: &FrameDetections) -> Option<f64> {
    if dets.boxes.is_empty() {
        return None;
    }
    let mut areas: Vec<f64> = dets.boxes.iter().map(|b| b.area()).collect();
    areas.sort_by(f64::total_cmp);
    let mid = areas.len() / 2;
    Some(if areas.len() % 2 == 1 {
        areas[mid]
    } else {
        (areas[mid - 1] + areas[mid]) / 2.0
    })
}

impl Policy for TodPolicy {
    fn name(&self) -> &str {
        "tod"
    }

    fn initial_detector(&self) -> usize {
        self.initial
    }

    fn step(&mut self, input: &PolicyInput<'_>) -> PolicyDecision {
        let next = match median_area(input.detections_now) {
            Some(area) => self.region_to_detector[size_region(area, &self.boundaries, input.meta)],
            None => input.current_detector,
        };
        PolicyDecision {
            next_detector: next,
            overhead: 0.0,
        }
    }
}

/// Steps one detector lighter when the measured latency violates the frame
/// budget, one heavier when it is under 30% of the budget.
#[derive(Debug, Clone)]
pub struct LadPolicy {
    order: Vec<usize>,
    initial: usize,
}

/// Fraction of the frame budget under which the next heavier detector is
/// assumed affordable.
const LAD_UPGRADE_FRACTION: f64 = 0.3;

impl LadPolicy {
    /// `order` lists detector indices lightest to heaviest; starts heaviest.
    pub fn new(order: Vec<usize>) -> Result<Self> {
        if order.is_empty() {
            return Err(Error::config("LAD needs a non-empty detector order"));
        }
        let initial = *order.last().expect("order is non-empty");
        Ok(LadPolicy { order, initial })
    }
}

impl Policy for LadPolicy {
    fn name(&self) -> &str {
        "lad"
    }

    fn initial_detector(&self) -> usize {
        self.initial
    }

    fn step(&mut self, input: &PolicyInput<'_>) -> PolicyDecision {
        let budget = 1.0 / input.fps;
        let rank = self
            .order
            .iter()
            .position(|&d| d == input.current_detector)
            .expect("current detector is in the order");
        let next_rank = if input.measured_latency > budget {
            rank.saturating_sub(1)
        } else if input.measured_latency < LAD_UPGRADE_FRACTION * budget {
            (rank + 1).min(self.order.len() - 1)
        } else {
            rank
        };
        PolicyDecision {
            next_detector: self.order[next_rank],
            overhead: 0.0,
        }
    }
}
