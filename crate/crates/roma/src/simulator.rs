//! Deterministic real-time replay of a detector pool over a video.
//!
//! Frames arrive at a fixed rate; analyzing one frame costs its detector's
//! latency (scaled by the workload schedule, plus the policy's decision
//! overhead), and every frame that arrives in the meantime is dropped. A
//! dropped frame reuses the boxes of the most recent analyzed frame, which is
//! exactly how the output is later scored.

use crate::error::{Error, Result};
use crate::estimator::StepTelemetry;
use crate::policy::{Policy, PolicyInput};
use crate::trace::{BoundingBox, DetectionTrace, FrameDetections, VideoMeta};

/// Piecewise-constant latency multiplier over frame ranges, modeling
/// background workload taking compute away from the detector.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSchedule {
    segments: Vec<(usize, f64)>,
}

impl WorkloadSchedule {
    /// `segments` are `(start_frame, multiplier)` pairs: strictly ascending
    /// start frames, the first at frame 0, multipliers positive.
    pub fn new(segments: Vec<(usize, f64)>) -> Result<Self> {
        match segments.first() {
            None => {
                return Err(Error::config(
                    "workload schedule needs at least one segment",
                ))
            }
            Some((0, _)) => {}
            Some((start, _)) => {
                return Err(Error::config(format!(
                    "workload schedule must start at frame 0, got {start}"
                )))
            }
        }
        for pair in segments.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::config(
                    "workload segment starts must be strictly ascending",
                ));
            }
        }
        if segments.iter().any(|(_, m)| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::config("workload multipliers must be positive"));
        }
        Ok(WorkloadSchedule { segments })
    }

    /// A single multiplier over the whole video.
    pub fn constant(multiplier: f64) -> Result<Self> {
        WorkloadSchedule::new(vec![(0, multiplier)])
    }

    pub fn multiplier_at(&self, frame: usize) -> f64 {
        self.segments
            .iter()
            .rev()
            .find(|(start, _)| *start <= frame)
            .map(|(_, m)| *m)
            .expect("first segment starts at frame 0")
    }

    pub fn segments(&self) -> &[(usize, f64)] {
        &self.segments
    }
}

/// The boxes standing in for one video frame, and where they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    /// Confidence-filtered boxes used for this frame.
    pub boxes: Vec<BoundingBox>,
    /// Most recent analyzed frame at or before this one.
    pub source_frame: usize,
    /// Detector that analyzed the source frame.
    pub detector: usize,
}

/// One analyzed frame in the timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzedFrame {
    /// Analyzed-frame counter.
    pub t: usize,
    pub frame_index: usize,
    pub detector: usize,
    /// Nominal latency x workload multiplier + decision overhead, seconds.
    pub simulated_latency: f64,
    /// Frames this analysis consumed, truncated at the end of the video.
    pub block_size: usize,
    /// Detector picked for the next analyzed frame.
    pub next_detector: usize,
    /// Decision overhead charged to this frame.
    pub overhead: f64,
}

/// Complete, immutable record of one replay.
#[derive(Debug, Clone)]
pub struct SimulationRun {
    /// One entry per video frame, in order.
    pub per_frame: Vec<FrameOutput>,
    pub analyzed: Vec<AnalyzedFrame>,
    /// Estimator internals per analyzed frame, when the policy exposes them.
    pub telemetry: Vec<StepTelemetry>,
}

impl SimulationRun {
    pub fn frame_count(&self) -> usize {
        self.per_frame.len()
    }

    /// Fraction of analyzed frames each detector handled.
    pub fn selection_fractions(&self, pool_size: usize) -> Vec<f64> {
        let mut counts = vec![0usize; pool_size];
        for a in &self.analyzed {
            counts[a.detector] += 1;
        }
        let total = self.analyzed.len().max(1) as f64;
        counts.iter().map(|c| *c as f64 / total).collect()
    }

    /// Per-frame boxes as a map, for MOT-format serialization.
    pub fn output_map(&self) -> std::collections::BTreeMap<usize, Vec<BoundingBox>> {
        self.per_frame
            .iter()
            .enumerate()
            .map(|(frame, out)| (frame, out.boxes.clone()))
            .collect()
    }
}

/// Knobs the replay itself needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulatorConfig {
    /// Boxes below this confidence are removed before policies see them and
    /// before they are copied to the output.
    pub confidence_threshold: f64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        SimulatorConfig {
            confidence_threshold: 0.3,
        }
    }
}

/// Replays the pool over the video under `schedule`, letting `policy` switch
/// detectors between analyzed frames.
///
/// Analysis starts at frame 0 with the policy's initial detector. Each
/// analyzed frame consumes `floor(fps * simulated_latency) + 1` frames; the
/// dropped ones copy the analyzed frame's boxes forward. The policy's
/// decision takes effect at the next analyzed frame. Identical inputs
/// produce identical runs.
pub fn run_simulation(
    traces: &[DetectionTrace],
    meta: &VideoMeta,
    schedule: &WorkloadSchedule,
    policy: &mut dyn Policy,
    config: &SimulatorConfig,
) -> Result<SimulationRun> {
    meta.validate()?;
    if traces.is_empty() {
        return Err(Error::config(
            "simulation needs at least one detector trace",
        ));
    }
    let pool = traces.len();
    let mut detector = policy.initial_detector();
    if detector >= pool {
        return Err(Error::config(format!(
            "policy initial detector {detector} out of range for a pool of {pool}"
        )));
    }

    let mut per_frame: Vec<FrameOutput> = Vec::with_capacity(meta.frame_count);
    let mut analyzed = Vec::new();
    let mut telemetry = Vec::new();
    let mut prev: Option<FrameDetections> = None;
    let mut frame = 0usize;
    let mut t = 0usize;

    while frame < meta.frame_count {
        let trace = &traces[detector];
        let raw = trace
            .detections_at(frame)
            .ok_or(Error::MissingFrame { detector, frame })?;
        let filtered = raw.filtered(config.confidence_threshold);
        let nominal = trace
            .latency
            .at(frame)
            .ok_or(Error::MissingFrame { detector, frame })?;

        let overhead = policy.decision_overhead(&filtered);
        let simulated_latency = nominal * schedule.multiplier_at(frame) + overhead;
        let consumed = (meta.fps * simulated_latency).floor() as usize + 1;

        let decision = policy.step(&PolicyInput {
            analyzed_frame_index: frame,
            current_detector: detector,
            detections_now: &filtered,
            detections_prev: prev.as_ref(),
            measured_latency: simulated_latency,
            fps: meta.fps,
            meta,
        });
        if decision.next_detector >= pool {
            return Err(Error::config(format!(
                "policy chose detector {} outside the pool of {pool}",
                decision.next_detector
            )));
        }
        if let Some(step) = policy.last_telemetry() {
            telemetry.push(step.clone());
        }
        debug_assert_eq!(decision.overhead, overhead, "policy overhead changed mid-frame");

        let block_end = (frame + consumed).min(meta.frame_count);
        for _ in frame..block_end {
            per_frame.push(FrameOutput {
                boxes: filtered.boxes.clone(),
                source_frame: frame,
                detector,
            });
        }
        analyzed.push(AnalyzedFrame {
            t,
            frame_index: frame,
            detector,
            simulated_latency,
            block_size: block_end - frame,
            next_detector: decision.next_detector,
            // The overhead actually folded into this frame's latency.
            overhead,
        });

        prev = Some(filtered);
        detector = decision.next_detector;
        frame += consumed;
        t += 1;
    }

    Ok(SimulationRun {
        per_frame,
        analyzed,
        telemetry,
    })
}
