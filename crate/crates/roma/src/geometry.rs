//! Box overlap math, object size regions, and size histograms.
//!
//! These are the label-free observables the selection model runs on: how much
//! consecutive detections overlap, and how detected object sizes distribute
//! over a small number of area regions.

use crate::error::{Error, Result};
use crate::trace::{BoundingBox, FrameDetections, VideoMeta};

/// Area thresholds splitting object sizes into regions, anchored to a
/// reference resolution.
///
/// `thresholds` holds the boundaries between consecutive regions, so `H - 1`
/// ascending values define `H` regions. Boundaries are lower-inclusive: an
/// area exactly on a threshold belongs to the larger region. At resolutions
/// other than the reference, thresholds scale by the frame-area ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionBoundaries {
    thresholds: Vec<f64>,
    reference: (u32, u32),
}

impl RegionBoundaries {
    pub fn new(thresholds: Vec<f64>, reference: (u32, u32)) -> Result<Self> {
        if reference.0 == 0 || reference.1 == 0 {
            return Err(Error::config("reference resolution must be positive"));
        }
        for pair in thresholds.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::config(format!(
                    "size thresholds must be strictly ascending, got {} before {}",
                    pair[0], pair[1]
                )));
            }
        }
        if thresholds.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::config("size thresholds must be positive"));
        }
        Ok(RegionBoundaries {
            thresholds,
            reference,
        })
    }

    /// Small/medium/large split at 2500 and 7500 px² on 640×480 frames.
    pub fn default_three_region() -> Self {
        RegionBoundaries {
            thresholds: vec![2500.0, 7500.0],
            reference: (640, 480),
        }
    }

    /// Number of regions `H`.
    pub fn region_count(&self) -> usize {
        self.thresholds.len() + 1
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn reference(&self) -> (u32, u32) {
        self.reference
    }

    /// Thresholds rescaled to `frame`'s resolution by frame-area ratio.
    pub fn scaled_thresholds(&self, frame: &VideoMeta) -> Vec<f64> {
        let ratio = frame.pixel_area() / (self.reference.0 as f64 * self.reference.1 as f64);
        self.thresholds.iter().map(|t| t * ratio).collect()
    }
}

/// Number of detected objects per size region (`H` bins).
///
/// Counts are reals: measured histograms hold integers, but estimates derived
/// from them are fractional.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeHistogram {
    pub counts: Vec<f64>,
}

impl SizeHistogram {
    pub fn zeros(regions: usize) -> Self {
        SizeHistogram {
            counts: vec![0.0; regions],
        }
    }

    /// Total number of objects counted.
    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }
}

/// Intersection over union of two boxes, in `[0, 1]`.
///
/// Computed on continuous coordinates; disjoint boxes yield 0.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let x_left = a.left.max(b.left);
    let y_top = a.top.max(b.top);
    let x_right = a.right().min(b.right());
    let y_bottom = a.bottom().min(b.bottom());
    let inter = (x_right - x_left).max(0.0) * (y_bottom - y_top).max(0.0);
    if inter <= 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// Counts the boxes of `prev` that still have an overlapping partner in
/// `curr`: `|{p in prev : exists c in curr with iou(p, c) >= threshold}|`.
///
/// Each `prev` box counts at most once, so the result is order-independent
/// and never exceeds `prev.boxes.len()`.
pub fn count_surviving(
    prev: &FrameDetections,
    curr: &FrameDetections,
    iou_threshold: f64,
) -> usize {
    prev.boxes
        .iter()
        .filter(|p| curr.boxes.iter().any(|c| iou(p, c) >= iou_threshold))
        .count()
}

/// 0-based size region of an object area at the given frame resolution.
///
/// Thresholds are scaled to the frame first; boundaries are lower-inclusive,
/// so `area == threshold` lands in the larger region.
pub fn size_region(area: f64, boundaries: &RegionBoundaries, frame: &VideoMeta) -> usize {
    boundaries
        .scaled_thresholds(frame)
        .iter()
        .filter(|t| area >= **t)
        .count()
}

/// Histogram of detected object sizes over the boundary regions.
pub fn histogram(
    dets: &FrameDetections,
    boundaries: &RegionBoundaries,
    frame: &VideoMeta,
) -> SizeHistogram {
    let mut hist = SizeHistogram::zeros(boundaries.region_count());
    for b in &dets.boxes {
        hist.counts[size_region(b.area(), boundaries, frame)] += 1.0;
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(left: f64, top: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(left, top, w, h, 1.0).unwrap()
    }

    fn meta_vga() -> VideoMeta {
        VideoMeta::new(100, 30.0, 640, 480).unwrap()
    }

    #[test]
    fn iou_identity() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn iou_disjoint() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let b = bb(20.0, 20.0, 5.0, 5.0);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_half_shift() {
        // Overlap 5x10 = 50, union 150.
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let b = bb(5.0, 0.0, 10.0, 10.0);
        assert!((iou(&a, &b) - 50.0 / 150.0).abs() < 1e-15);
    }

    #[test]
    fn iou_touching_edges_is_zero() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let b = bb(10.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn surviving_identical_lists() {
        let f = FrameDetections::new(0, vec![bb(0.0, 0.0, 10.0, 10.0), bb(50.0, 50.0, 8.0, 8.0)]);
        assert_eq!(count_surviving(&f, &f, 0.5), 2);
    }

    #[test]
    fn surviving_empty_current() {
        let prev = FrameDetections::new(0, vec![bb(0.0, 0.0, 10.0, 10.0)]);
        let curr = FrameDetections::empty(1);
        assert_eq!(count_surviving(&prev, &curr, 0.5), 0);
    }

    #[test]
    fn surviving_partial_overlap() {
        // First prev box overlaps the moved box at IoU 1/3 >= 0.3; second is far away.
        let prev = FrameDetections::new(
            0,
            vec![bb(0.0, 0.0, 10.0, 10.0), bb(100.0, 100.0, 10.0, 10.0)],
        );
        let curr = FrameDetections::new(1, vec![bb(5.0, 0.0, 10.0, 10.0)]);
        assert_eq!(count_surviving(&prev, &curr, 0.3), 1);
    }

    #[test]
    fn regions_at_reference_resolution() {
        let b = RegionBoundaries::default_three_region();
        let meta = meta_vga();
        assert_eq!(size_region(2499.0, &b, &meta), 0);
        assert_eq!(size_region(2500.0, &b, &meta), 1);
        assert_eq!(size_region(7499.0, &b, &meta), 1);
        assert_eq!(size_region(7500.0, &b, &meta), 2);
    }

    #[test]
    fn regions_scale_with_resolution() {
        let b = RegionBoundaries::default_three_region();
        let meta = VideoMeta::new(100, 30.0, 1280, 960).unwrap();
        // Frame area is 4x the reference, so thresholds become 10000 and 30000.
        assert_eq!(size_region(10000.0, &b, &meta), 1);
        assert_eq!(size_region(9999.0, &b, &meta), 0);
        assert_eq!(size_region(30000.0, &b, &meta), 2);
    }

    #[test]
    fn histogram_spreads_by_region() {
        let b = RegionBoundaries::default_three_region();
        let meta = meta_vga();
        let dets = FrameDetections::new(
            0,
            vec![
                bb(0.0, 0.0, 10.0, 10.0),  // 100 px², small
                bb(0.0, 0.0, 100.0, 50.0), // 5000 px², medium
                bb(0.0, 0.0, 100.0, 90.0), // 9000 px², large
            ],
        );
        let hist = histogram(&dets, &b, &meta);
        assert_eq!(hist.counts, vec![1.0, 1.0, 1.0]);
        assert_eq!(hist.total(), 3.0);
    }

    #[test]
    fn histogram_empty_frame() {
        let b = RegionBoundaries::default_three_region();
        let hist = histogram(&FrameDetections::empty(0), &b, &meta_vga());
        assert_eq!(hist.counts, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn single_region_boundaries() {
        let b = RegionBoundaries::new(vec![], (640, 480)).unwrap();
        assert_eq!(b.region_count(), 1);
        assert_eq!(size_region(1e6, &b, &meta_vga()), 0);
    }

    #[test]
    fn rejects_unordered_thresholds() {
        assert!(RegionBoundaries::new(vec![7500.0, 2500.0], (640, 480)).is_err());
    }
}
