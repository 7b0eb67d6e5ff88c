//! Detection accuracy scoring: greedy IoU matching, 11-point interpolated
//! average precision, and real-time AP over a simulation run.
//!
//! Real-time AP scores every video frame, including the dropped frames that
//! reuse stale boxes, each against its own ground truth. That makes the
//! metric sensitive to both detector quality and frame drops.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::iou;
use crate::simulator::SimulationRun;
use crate::trace::{BoundingBox, DetectionTrace, FrameDetections, GroundTruth};

/// One scored detection: its confidence and whether it matched ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedDetection {
    pub confidence: f64,
    pub true_positive: bool,
}

/// Precision/recall points in descending confidence-rank order; recall never
/// decreases along the curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub points: Vec<(f64, f64)>,
}

impl PrCurve {
    /// Cumulative precision/recall after ranking all detections by
    /// descending confidence (stable for ties).
    pub fn from_matches(matches: &[MatchedDetection], gt_count: usize) -> PrCurve {
        let mut ranked = matches.to_vec();
        ranked.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
        let mut tp = 0usize;
        let mut fp = 0usize;
        let points = ranked
            .iter()
            .map(|m| {
                if m.true_positive {
                    tp += 1;
                } else {
                    fp += 1;
                }
                let precision = tp as f64 / (tp + fp) as f64;
                let recall = if gt_count == 0 {
                    0.0
                } else {
                    tp as f64 / gt_count as f64
                };
                (recall, precision)
            })
            .collect();
        PrCurve { points }
    }

    /// Interpolated precision at `recall`: the maximum precision among all
    /// curve points with recall at or beyond it, 0 if none exist.
    pub fn interpolated_precision(&self, recall: f64) -> f64 {
        self.points
            .iter()
            .filter(|(r, _)| *r >= recall)
            .map(|(_, p)| *p)
            .fold(0.0, f64::max)
    }
}

/// An AP score with its raw match counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub ap: f64,
    pub tp: usize,
    pub fp: usize,
    pub gt_count: usize,
}

/// Greedily matches detections to ground truth at one frame.
///
/// Detections are taken in descending confidence order (stable for equal
/// confidences); each matches the unmatched ground-truth box of highest IoU
/// at or above the threshold, and each ground-truth box matches at most once.
/// Returned flags are in the ranked order.
pub fn match_frame(
    dets: &FrameDetections,
    gt: &[BoundingBox],
    iou_threshold: f64,
) -> Vec<MatchedDetection> {
    let mut order: Vec<usize> = (0..dets.boxes.len()).collect();
    order.sort_by(|&a, &b| {
        dets.boxes[b]
            .confidence
            .total_cmp(&dets.boxes[a].confidence)
    });
    let mut gt_taken = vec![false; gt.len()];
    order
        .into_iter()
        .map(|d| {
            let det = &dets.boxes[d];
            let mut best: Option<(usize, f64)> = None;
            for (g, gt_box) in gt.iter().enumerate() {
                if gt_taken[g] {
                    continue;
                }
                let overlap = iou(det, gt_box);
                if overlap >= iou_threshold && best.is_none_or(|(_, b)| overlap > b) {
                    best = Some((g, overlap));
                }
            }
            let true_positive = match best {
                Some((g, _)) => {
                    gt_taken[g] = true;
                    true
                }
                None => false,
            };
            MatchedDetection {
                confidence: det.confidence,
                true_positive,
            }
        })
        .collect()
}

/// 11-point interpolated average precision over all matched detections.
///
/// Precision is interpolated as the right-sided maximum and averaged at the
/// recall anchors 0.0, 0.1, ..., 1.0. With no ground truth the score is 1 if
/// there are also no detections and 0 otherwise.
pub fn ap_11point(matches: &[MatchedDetection], gt_count: usize) -> ApReport {
    let tp = matches.iter().filter(|m| m.true_positive).count();
    let fp = matches.len() - tp;
    if gt_count == 0 {
        return ApReport {
            ap: if matches.is_empty() { 1.0 } else { 0.0 },
            tp,
            fp,
            gt_count,
        };
    }
    let curve = PrCurve::from_matches(matches, gt_count);
    let ap = (0..=10)
        .map(|k| curve.interpolated_precision(k as f64 / 10.0))
        .sum::<f64>()
        / 11.0;
    ApReport {
        ap,
        tp,
        fp,
        gt_count,
    }
}

/// Scores a simulation run against ground truth over every video frame.
///
/// Copied boxes on dropped frames are scored against those frames' own
/// ground truth. Detections below `confidence_threshold` are discarded
/// before matching.
pub fn realtime_ap(
    run: &SimulationRun,
    gt: &GroundTruth,
    iou_threshold: f64,
    confidence_threshold: f64,
) -> Result<ApReport> {
    if let Some(max_frame) = gt.max_frame() {
        if max_frame >= run.frame_count() {
            return Err(Error::Evaluation(format!(
                "ground truth frame {max_frame} outside the {}-frame run",
                run.frame_count()
            )));
        }
    }
    let mut matches = Vec::new();
    let mut gt_count = 0usize;
    for (frame, output) in run.per_frame.iter().enumerate() {
        let dets = FrameDetections::new(
            frame,
            output
                .boxes
                .iter()
                .filter(|b| b.confidence >= confidence_threshold)
                .copied()
                .collect(),
        );
        let gt_boxes = gt.boxes_at(frame);
        gt_count += gt_boxes.len();
        matches.extend(match_frame(&dets, gt_boxes, iou_threshold));
    }
    Ok(ap_11point(&matches, gt_count))
}

/// Offline AP of a detection trace: every frame scored with its own boxes,
/// as if analysis were free.
pub fn offline_ap(
    trace: &DetectionTrace,
    gt: &GroundTruth,
    iou_threshold: f64,
    confidence_threshold: f64,
) -> ApReport {
    let mut matches = Vec::new();
    let mut gt_count = 0usize;
    for (frame, dets) in &trace.per_frame {
        let filtered = dets.filtered(confidence_threshold);
        let gt_boxes = gt.boxes_at(*frame);
        gt_count += gt_boxes.len();
        matches.extend(match_frame(&filtered, gt_boxes, iou_threshold));
    }
    ap_11point(&matches, gt_count)
}
