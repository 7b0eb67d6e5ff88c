//! The run-time state machine behind detector selection: latency tracking,
//! frame-block sizing, the per-dropped-frame accuracy degradation recursion,
//! and the relative average precision (RAP) scores it produces.
//!
//! Per analyzed frame the estimator turns three label-free observables — the
//! boxes just detected, the boxes detected one step earlier, and the measured
//! detection latency — into one RAP score per detector in the pool. The
//! detector with the highest score runs next.

use crate::error::{Error, Result};
use crate::geometry::{count_surviving, histogram, SizeHistogram};
use crate::prior::{detection_ratio, estimate_detected, PriorModel};
use crate::trace::{FrameDetections, VideoMeta};

/// Cap on frame-block sizes and on the degradation vector length.
pub const MAX_BLOCK_SIZE: usize = 30;

/// Minimum current block size for refreshing the degradation vector; smaller
/// blocks are too noisy, so the previous vector is kept.
pub const MIN_UPDATE_BLOCK: usize = 3;

/// Added to the measured-count divisor so the offline accuracy ratio stays
/// finite on empty frames.
pub const COUNT_GUARD: f64 = 0.1;

/// Latency estimates for every detector in the pool, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyState {
    /// Estimated latency per detector.
    pub estimates: Vec<f64>,
    /// Most recent measured latency of the running detector.
    pub last_measured: f64,
    /// Detector analyzing the current frame.
    pub current: usize,
    /// Detector that analyzed the previous frame.
    pub previous: usize,
}

impl LatencyState {
    pub fn new(estimates: Vec<f64>, current: usize) -> Result<Self> {
        if estimates.is_empty() || current >= estimates.len() {
            return Err(Error::config(
                "latency state needs an in-range current detector",
            ));
        }
        if estimates.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::config(
                "latency estimates must be positive and finite",
            ));
        }
        let last_measured = estimates[current];
        Ok(LatencyState {
            estimates,
            last_measured,
            current,
            previous: current,
        })
    }
}

/// Re-estimates every detector's latency from one new measurement.
///
/// While the same detector keeps running, a latency change can only come from
/// a change in available compute, which affects the whole pool alike, so
/// every estimate is scaled by the measured-over-estimated ratio of the
/// running detector. Right after a switch the measurement says nothing about
/// the relative shift, so only the running detector's estimate is replaced.
pub fn update_latency(
    estimates: &[f64],
    current: usize,
    measured: f64,
    switched: bool,
) -> Result<Vec<f64>> {
    if !(measured > 0.0 && measured.is_finite()) {
        return Err(Error::config(format!(
            "measured latency must be positive, got {measured}"
        )));
    }
    if switched {
        let mut next = estimates.to_vec();
        next[current] = measured;
        Ok(next)
    } else {
        let ratio = measured / estimates[current];
        Ok(estimates.iter().map(|l| ratio * l).collect())
    }
}

/// Number of frames one analysis consumes at this latency: the analyzed frame
/// plus every frame that arrives while the detector is busy. Clamped to
/// [`MAX_BLOCK_SIZE`].
pub fn frame_block_size(fps: f64, latency: f64) -> usize {
    let raw = (fps * latency).floor();
    let block = if raw >= (MAX_BLOCK_SIZE - 1) as f64 {
        MAX_BLOCK_SIZE
    } else {
        raw as usize + 1
    };
    block.max(1)
}

/// Objects lost per dropped frame: the detected objects of the previous
/// analyzed frame that no longer overlap anything on the current one, spread
/// over the current frame block.
pub fn missing_per_frame(prev_count: f64, surviving: usize, current_block: usize) -> f64 {
    (prev_count - surviving as f64) / current_block as f64
}

/// Per-dropped-frame accuracy decay shared by all detectors.
///
/// `beta[j]` estimates the accuracy on the j-th frame of a block relative to
/// the analyzed frame: `beta[0]` is always 1, and the vector never increases.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationState {
    /// Decay ratios for the current step.
    pub beta: Vec<f64>,
    /// The previous step's ratios, kept for carry-over and the freeze rule.
    pub beta_prev: Vec<f64>,
    /// Blocks smaller than this leave the vector untouched.
    pub min_update_block: usize,
}

impl Default for DegradationState {
    fn default() -> Self {
        DegradationState {
            beta: vec![1.0; MAX_BLOCK_SIZE],
            beta_prev: vec![1.0; MAX_BLOCK_SIZE],
            min_update_block: MIN_UPDATE_BLOCK,
        }
    }
}

/// Recomputes the degradation vector from this step's observations.
///
/// Starting from `q0` detected objects, each dropped frame loses `u` of them;
/// both precision and recall shrink with the surviving fraction, so the decay
/// per frame is that fraction squared. Beyond `current_block - 1` no fresh
/// observation exists, so the previous step's frame-to-frame decay ratios are
/// reused. A `current_block` under `min_update_block` freezes the vector
/// entirely, since survival counts on tiny blocks are dominated by box noise.
pub fn update_betas(
    state: &DegradationState,
    q0: f64,
    u: f64,
    current_block: usize,
) -> DegradationState {
    if current_block < state.min_update_block {
        return DegradationState {
            beta: state.beta.clone(),
            beta_prev: state.beta.clone(),
            min_update_block: state.min_update_block,
        };
    }
    let prev = &state.beta;
    let cb = current_block.min(MAX_BLOCK_SIZE);
    let mut beta = vec![1.0; MAX_BLOCK_SIZE];
    let mut q_prev = q0;
    for j in 1..MAX_BLOCK_SIZE {
        if j < cb {
            let q = (q_prev - u).max(0.0);
            beta[j] = if q_prev == 0.0 {
                0.0
            } else {
                beta[j - 1] * (q / q_prev).powi(2)
            };
            q_prev = q;
        } else if prev[j - 1] == 0.0 {
            beta[j] = 0.0;
        } else {
            beta[j] = beta[j - 1] * (prev[j] / prev[j - 1]);
        }
    }
    DegradationState {
        beta,
        beta_prev: prev.clone(),
        min_update_block: state.min_update_block,
    }
}

/// One RAP evaluation of the whole pool.
#[derive(Debug, Clone, PartialEq)]
pub struct RapResult {
    /// Offline accuracy ratio per detector (estimated count over measured).
    pub alpha: Vec<f64>,
    /// Degradation ratio per detector (mean decay over its block, relative
    /// to the running detector's).
    pub gamma: Vec<f64>,
    /// Relative average precision `alpha * gamma` per detector.
    pub rap: Vec<f64>,
    /// Frame block size per detector at the current latency estimates.
    pub block_sizes: Vec<usize>,
}

/// Scores every detector relative to the one currently running.
///
/// `alpha` compares how many objects each detector would have found against
/// the measured count (with [`COUNT_GUARD`] keeping the divisor positive);
/// `gamma` compares the mean decay over each detector's own frame block
/// against the running detector's. Their product estimates each detector's
/// average accuracy over its block relative to the current choice.
pub fn compute_rap(
    estimated_counts: &[f64],
    measured_count: f64,
    betas: &DegradationState,
    block_sizes: &[usize],
    current: usize,
) -> RapResult {
    let block_mean = |b: usize| -> f64 {
        let b = b.clamp(1, MAX_BLOCK_SIZE);
        betas.beta[..b].iter().sum::<f64>() / b as f64
    };
    let current_mean = block_mean(block_sizes[current]);
    let divisor = measured_count + COUNT_GUARD;
    let alpha: Vec<f64> = estimated_counts.iter().map(|l| l / divisor).collect();
    let gamma: Vec<f64> = block_sizes
        .iter()
        .map(|&b| block_mean(b) / current_mean)
        .collect();
    let rap = alpha.iter().zip(&gamma).map(|(a, g)| a * g).collect();
    RapResult {
        alpha,
        gamma,
        rap,
        block_sizes: block_sizes.to_vec(),
    }
}

/// Index of the detector with the highest RAP score; ties go to the lighter
/// detector (earlier in `order`).
pub fn select_detector(rap: &RapResult, order: &[usize]) -> usize {
    let mut best = order[0];
    for &candidate in &order[1..] {
        if rap.rap[candidate] > rap.rap[best] {
            best = candidate;
        }
    }
    best
}

/// Everything recorded about one estimator step, for telemetry files.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTelemetry {
    /// Analyzed-frame counter (0 for the first analyzed frame).
    pub t: usize,
    pub frame_index: usize,
    pub current_detector: usize,
    pub measured_latency: f64,
    pub latency_estimates: Vec<f64>,
    pub block_sizes: Vec<usize>,
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    pub rap: Vec<f64>,
    /// Survival count against the previous analyzed frame; absent on the
    /// first step.
    pub surviving: Option<usize>,
    pub missing_per_frame: Option<f64>,
    pub chosen: usize,
}

/// The full per-stream selection state machine.
///
/// One instance drives one video stream; streams do not share state. The
/// default detector at start-up is the heaviest in the pool.
#[derive(Debug, Clone)]
pub struct Estimator {
    prior: PriorModel,
    survival_iou: f64,
    fps: f64,
    latency: LatencyState,
    degradation: DegradationState,
    prev_detections: Option<FrameDetections>,
    prev_count: f64,
    t: usize,
}

impl Estimator {
    /// `initial_latencies` are the per-detector priors measured offline on
    /// the target platform; they seed the block sizes before the first
    /// measurement arrives.
    pub fn new(
        prior: PriorModel,
        initial_latencies: Vec<f64>,
        fps: f64,
        survival_iou: f64,
    ) -> Result<Self> {
        if initial_latencies.len() != prior.detector_count() {
            return Err(Error::config(
                "initial latency count must match the detector pool",
            ));
        }
        if !(survival_iou > 0.0 && survival_iou <= 1.0) {
            return Err(Error::config("survival IoU threshold must be in (0, 1]"));
        }
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::config("fps must be positive"));
        }
        let start = prior.heaviest();
        let latency = LatencyState::new(initial_latencies, start)?;
        Ok(Estimator {
            prior,
            survival_iou,
            fps,
            latency,
            degradation: DegradationState::default(),
            prev_detections: None,
            prev_count: 0.0,
            t: 0,
        })
    }

    pub fn current_detector(&self) -> usize {
        self.latency.current
    }

    pub fn prior(&self) -> &PriorModel {
        &self.prior
    }

    pub fn latency_state(&self) -> &LatencyState {
        &self.latency
    }

    pub fn degradation(&self) -> &DegradationState {
        &self.degradation
    }

    /// Runs one full selection step for an analyzed frame and returns the
    /// detector to run next, with the step's internals.
    ///
    /// `detections` must already be confidence-filtered; `measured_latency`
    /// is the wall-clock cost of analyzing this frame.
    pub fn step(
        &mut self,
        detections: &FrameDetections,
        meta: &VideoMeta,
        measured_latency: f64,
    ) -> Result<StepTelemetry> {
        let current = self.latency.current;
        let observed: SizeHistogram = histogram(detections, &self.prior.boundaries, meta);
        let measured_count = observed.total();
        let estimated_counts: Vec<f64> = (0..self.prior.detector_count())
            .map(|i| estimate_detected(&detection_ratio(&self.prior, i, current), &observed))
            .collect();

        let switched = current != self.latency.previous;
        let estimates =
            update_latency(&self.latency.estimates, current, measured_latency, switched)?;
        let block_sizes: Vec<usize> = estimates
            .iter()
            .map(|&l| frame_block_size(self.fps, l))
            .collect();

        // The first analyzed frame has no predecessor to compare against, so
        // the degradation vector keeps its all-ones initialization.
        let mut surviving = None;
        let mut missing = None;
        if let Some(prev) = &self.prev_detections {
            let m = count_surviving(prev, detections, self.survival_iou);
            let u = missing_per_frame(self.prev_count, m, block_sizes[current]);
            self.degradation =
                update_betas(&self.degradation, measured_count, u, block_sizes[current]);
            surviving = Some(m);
            missing = Some(u);
        }

        let rap = compute_rap(
            &estimated_counts,
            measured_count,
            &self.degradation,
            &block_sizes,
            current,
        );
        let chosen = select_detector(&rap, &self.prior.detector_order);

        let telemetry = StepTelemetry {
            t: self.t,
            frame_index: detections.frame_index,
            current_detector: current,
            measured_latency,
            latency_estimates: estimates.clone(),
            block_sizes: rap.block_sizes.clone(),
            alpha: rap.alpha,
            gamma: rap.gamma,
            rap: rap.rap,
            surviving,
            missing_per_frame: missing,
            chosen,
        };

        self.latency = LatencyState {
            estimates,
            last_measured: measured_latency,
            current: chosen,
            previous: current,
        };
        self.prev_detections = Some(detections.clone());
        self.prev_count = measured_count;
        self.t += 1;
        Ok(telemetry)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RegionBoundaries;
    use crate::trace::BoundingBox;

    #[test]
    fn latency_scales_proportionally_when_not_switched() {
        let estimates = vec![0.1, 0.2, 0.3];
        let next = update_latency(&estimates, 1, 0.4, false).unwrap();
        assert_eq!(next, vec![0.2, 0.4, 0.6]);
    }

    #[test]
    fn latency_unchanged_on_equal_measurement() {
        let estimates = vec![0.1, 0.2, 0.3];
        let next = update_latency(&estimates, 2, 0.3, false).unwrap();
        assert_eq!(next, estimates);
    }

    #[test]
    fn latency_switch_updates_only_current() {
        let estimates = vec![0.1, 0.2, 0.3];
        let next = update_latency(&estimates, 0, 0.15, true).unwrap();
        assert_eq!(next, vec![0.15, 0.2, 0.3]);
    }

    #[test]
    fn latency_rejects_nonpositive_measurement() {
        assert!(update_latency(&[0.1], 0, 0.0, false).is_err());
        assert!(update_latency(&[0.1], 0, -1.0, true).is_err());
    }

    #[test]
    fn block_size_examples() {
        assert_eq!(frame_block_size(30.0, 0.225), 7);
        assert_eq!(frame_block_size(30.0, 0.0), 1);
        assert_eq!(frame_block_size(25.0, 0.1), 3);
        // Cap at the maximum block size.
        assert_eq!(frame_block_size(30.0, 10.0), MAX_BLOCK_SIZE);
    }

    #[test]
    fn missing_per_frame_examples() {
        assert_eq!(missing_per_frame(10.0, 10, 3), 0.0);
        assert_eq!(missing_per_frame(10.0, 7, 3), 1.0);
        assert_eq!(missing_per_frame(0.0, 0, 5), 0.0);
    }

    #[test]
    fn betas_stay_one_without_loss() {
        let state = DegradationState::default();
        let next = update_betas(&state, 10.0, 0.0, 5);
        assert_eq!(next.beta, vec![1.0; MAX_BLOCK_SIZE]);
    }

    #[test]
    fn betas_follow_quadratic_decay() {
        let state = DegradationState::default();
        let next = update_betas(&state, 10.0, 2.0, 3);
        // q = [10, 8, 6]; beta_1 = (8/10)^2 = 0.64, beta_2 = 0.64 * (6/8)^2 = 0.36.
        assert!((next.beta[1] - 0.64).abs() < 1e-15);
        assert!((next.beta[2] - 0.36).abs() < 1e-15);
        // Beyond the current block the all-ones history carries over flat.
        assert!((next.beta[3] - 0.36).abs() < 1e-15);
    }

    #[test]
    fn betas_freeze_below_minimum_block() {
        let state = DegradationState::default();
        let decayed = update_betas(&state, 10.0, 2.0, 3);
        let frozen = update_betas(&decayed, 10.0, 5.0, 2);
        assert_eq!(frozen.beta, decayed.beta);
    }

    #[test]
    fn betas_zero_once_objects_run_out() {
        let state = DegradationState::default();
        let next = update_betas(&state, 4.0, 2.0, 5);
        // q = [4, 2, 0, 0, ...]; the 0/0 convention pins later entries at 0.
        assert!((next.beta[1] - 0.25).abs() < 1e-15);
        assert_eq!(next.beta[2], 0.0);
        assert_eq!(next.beta[3], 0.0);
    }

    #[test]
    fn betas_carry_over_previous_ratios() {
        let state = DegradationState::default();
        let first = update_betas(&state, 10.0, 2.0, 6);
        // Current block of 3 refreshes the head; the tail reuses the decay
        // ratios observed on the previous step.
        let second = update_betas(&first, 10.0, 1.0, 3);
        let expected_3 = second.beta[2] * (first.beta[3] / first.beta[2]);
        assert!((second.beta[3] - expected_3).abs() < 1e-15);
        assert_eq!(second.beta_prev, first.beta);
    }

    #[test]
    fn betas_invariants_hold() {
        let mut state = DegradationState::default();
        for (q0, u, block) in [(12.0, 0.5, 4), (8.0, 3.0, 7), (2.0, 1.5, 3), (5.0, 0.1, 2)] {
            state = update_betas(&state, q0, u, block);
            assert_eq!(state.beta[0], 1.0);
            for j in 1..MAX_BLOCK_SIZE {
                assert!(state.beta[j] <= state.beta[j - 1]);
                assert!((0.0..=1.0).contains(&state.beta[j]));
            }
        }
    }

    #[test]
    fn rap_symmetric_pool() {
        let betas = DegradationState::default();
        let rap = compute_rap(&[5.0, 5.0, 5.0], 5.0, &betas, &[4, 4, 4], 1);
        for a in &rap.rap {
            assert!((a - 5.0 / 5.1).abs() < 1e-15);
        }
    }

    #[test]
    fn rap_gamma_prefers_small_blocks() {
        let mut beta = vec![0.0; MAX_BLOCK_SIZE];
        beta[0] = 1.0;
        beta[1] = 0.64;
        beta[2] = 0.36;
        let betas = DegradationState {
            beta: beta.clone(),
            beta_prev: beta,
            min_update_block: MIN_UPDATE_BLOCK,
        };
        let rap = compute_rap(&[1.0, 1.0], 1.0, &betas, &[1, 3], 1);
        let expected = 1.0 / ((1.0 + 0.64 + 0.36) / 3.0);
        assert!((rap.gamma[0] - expected).abs() < 1e-12);
        assert!((rap.gamma[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rap_guard_on_empty_frame() {
        let betas = DegradationState::default();
        let rap = compute_rap(&[2.0, 0.0], 0.0, &betas, &[1, 1], 1);
        assert!((rap.alpha[0] - 20.0).abs() < 1e-12);
        assert_eq!(rap.alpha[1], 0.0);
    }

    #[test]
    fn selection_argmax_and_ties() {
        let mk = |raps: Vec<f64>| {
            let n = raps.len();
            RapResult {
                alpha: raps.clone(),
                gamma: vec![1.0; n],
                rap: raps,
                block_sizes: vec![1; n],
            }
        };
        let order: Vec<usize> = (0..4).collect();
        assert_eq!(select_detector(&mk(vec![0.9, 1.0, 1.1, 1.05]), &order), 2);
        // All equal: the lightest wins.
        assert_eq!(select_detector(&mk(vec![1.0, 1.0, 1.0, 1.0]), &order), 0);
        assert_eq!(select_detector(&mk(vec![0.7]), &[0]), 0);
        // A non-identity order breaks ties toward its first entry.
        assert_eq!(select_detector(&mk(vec![1.0, 1.0]), &[1, 0]), 1);
    }

    #[test]
    fn estimator_starts_heaviest_and_stays_on_static_scene() {
        let prior = PriorModel::new(
            vec![vec![2.0, 4.0, 4.0], vec![10.0, 5.0, 5.0]],
            RegionBoundaries::default_three_region(),
            vec![0, 1],
        )
        .unwrap();
        let meta = VideoMeta::new(100, 30.0, 640, 480).unwrap();
        let mut est = Estimator::new(prior, vec![0.01, 0.02], 30.0, 0.5).unwrap();
        assert_eq!(est.current_detector(), 1);
        let frame = FrameDetections::new(
            0,
            vec![
                BoundingBox::new(0.0, 0.0, 20.0, 20.0, 1.0).unwrap(),
                BoundingBox::new(100.0, 100.0, 80.0, 80.0, 1.0).unwrap(),
            ],
        );
        for i in 0..5 {
            let tel = est.step(&frame, &meta, 0.02).unwrap();
            assert_eq!(tel.t, i);
            // Static scene: no loss, gamma 1, the bigger estimated count wins.
            assert_eq!(tel.chosen, 1);
        }
        assert_eq!(est.current_detector(), 1);
    }
}
