//! Frames, detections, ground truth, and detector traces.
//!
//! A [`DetectionTrace`] stands in for a live detector: it carries the boxes the
//! detector would emit on every frame of a video together with the detection
//! latency it would incur. Traces, ground truth, and video metadata are
//! immutable once built and can be shared freely across experiment runs.
//!
//! MOT-style CSV files are 1-based on disk; all in-memory frame indices are
//! 0-based. [`parse_mot`] re-bases on ingestion and [`write_mot`] shifts back.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Axis-aligned box in pixel coordinates, with a detection confidence.
///
/// Width and height are strictly positive, so the box always has positive
/// area. Coordinates may be fractional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    /// Confidence in `[0, 1]`. Ground-truth boxes carry `1.0`.
    pub confidence: f64,
}

impl BoundingBox {
    pub fn new(left: f64, top: f64, width: f64, height: f64, confidence: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::config(format!(
                "bounding box must have positive width and height, got {width}x{height}"
            )));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::config(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        if !(left.is_finite() && top.is_finite() && width.is_finite() && height.is_finite()) {
            return Err(Error::config("bounding box coordinates must be finite"));
        }
        Ok(BoundingBox {
            left,
            top,
            width,
            height,
            confidence,
        })
    }

    /// Pixel area, always positive.
    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }
}

/// The boxes a detector produced on one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameDetections {
    pub frame_index: usize,
    pub boxes: Vec<BoundingBox>,
}

impl FrameDetections {
    pub fn new(frame_index: usize, boxes: Vec<BoundingBox>) -> Self {
        FrameDetections { frame_index, boxes }
    }

    pub fn empty(frame_index: usize) -> Self {
        FrameDetections {
            frame_index,
            boxes: Vec::new(),
        }
    }

    /// Boxes at or above `threshold`, preserving order.
    pub fn filtered(&self, threshold: f64) -> FrameDetections {
        FrameDetections {
            frame_index: self.frame_index,
            boxes: self
                .boxes
                .iter()
                .filter(|b| b.confidence >= threshold)
                .copied()
                .collect(),
        }
    }
}

/// Per-frame detection latency of a detector, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub enum LatencyProfile {
    /// The same latency on every frame.
    Constant(f64),
    /// An explicit per-frame latency trace.
    PerFrame(BTreeMap<usize, f64>),
}

impl LatencyProfile {
    pub fn at(&self, frame: usize) -> Option<f64> {
        match self {
            LatencyProfile::Constant(s) => Some(*s),
            LatencyProfile::PerFrame(map) => map.get(&frame).copied(),
        }
    }

    fn validate(&self, frame_count: usize) -> Result<()> {
        match self {
            LatencyProfile::Constant(s) => {
                if !(*s > 0.0 && s.is_finite()) {
                    return Err(Error::config(format!("latency must be positive, got {s}")));
                }
            }
            LatencyProfile::PerFrame(map) => {
                for frame in 0..frame_count {
                    match map.get(&frame) {
                        None => {
                            return Err(Error::config(format!(
                                "latency trace missing frame {frame}"
                            )))
                        }
                        Some(s) if !(*s > 0.0 && s.is_finite()) => {
                            return Err(Error::config(format!(
                                "latency at frame {frame} must be positive, got {s}"
                            )))
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(())
    }

    /// Mean latency over the first `frame_count` frames; orders detectors
    /// from lightest to heaviest.
    pub fn mean(&self, frame_count: usize) -> f64 {
        match self {
            LatencyProfile::Constant(s) => *s,
            LatencyProfile::PerFrame(map) => {
                let sum: f64 = (0..frame_count).filter_map(|f| map.get(&f)).sum();
                sum / frame_count.max(1) as f64
            }
        }
    }
}

/// Pre-computed stand-in for one detector: its boxes and latency per frame.
#[derive(Debug, Clone)]
pub struct DetectionTrace {
    pub detector_id: usize,
    pub per_frame: BTreeMap<usize, FrameDetections>,
    pub latency: LatencyProfile,
}

impl DetectionTrace {
    /// Builds a trace covering every frame of `0..frame_count`. Frames absent
    /// from `detections` (a detector that found nothing) become empty entries,
    /// so the trace always covers the whole video.
    pub fn from_parts(
        detector_id: usize,
        detections: BTreeMap<usize, Vec<BoundingBox>>,
        latency: LatencyProfile,
        frame_count: usize,
    ) -> Result<Self> {
        if let Some((&frame, _)) = detections.range(frame_count..).next() {
            return Err(Error::config(format!(
                "detection at frame {frame} outside video of {frame_count} frames"
            )));
        }
        latency.validate(frame_count)?;
        let per_frame = (0..frame_count)
            .map(|f| {
                let boxes = detections.get(&f).cloned().unwrap_or_default();
                (f, FrameDetections::new(f, boxes))
            })
            .collect();
        Ok(DetectionTrace {
            detector_id,
            per_frame,
            latency,
        })
    }

    pub fn detections_at(&self, frame: usize) -> Option<&FrameDetections> {
        self.per_frame.get(&frame)
    }

    pub fn frame_count(&self) -> usize {
        self.per_frame.len()
    }
}

/// Labeled boxes per frame; used only by evaluation, never by policies.
#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    pub per_frame: BTreeMap<usize, Vec<BoundingBox>>,
}

impl GroundTruth {
    pub fn new(per_frame: BTreeMap<usize, Vec<BoundingBox>>) -> Self {
        GroundTruth { per_frame }
    }

    pub fn boxes_at(&self, frame: usize) -> &[BoundingBox] {
        self.per_frame.get(&frame).map_or(&[], Vec::as_slice)
    }

    pub fn total_boxes(&self) -> usize {
        self.per_frame.values().map(Vec::len).sum()
    }

    pub fn max_frame(&self) -> Option<usize> {
        self.per_frame.keys().next_back().copied()
    }
}

/// Static properties of the video stream being analyzed.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VideoMeta {
    pub frame_count: usize,
    /// Arrival rate of frames; also the real-time constraint.
    pub fps: f64,
    pub width: u32,
    pub height: u32,
}

impl VideoMeta {
    pub fn new(frame_count: usize, fps: f64, width: u32, height: u32) -> Result<Self> {
        let meta = VideoMeta {
            frame_count,
            fps,
            width,
            height,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_count == 0 {
            return Err(Error::config("frame_count must be at least 1"));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::config(format!(
                "fps must be positive, got {}",
                self.fps
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("frame dimensions must be positive"));
        }
        Ok(())
    }

    pub fn pixel_area(&self) -> f64 {
        self.width as f64 * self.height as f64
    }
}

/// Which flavor of MOT CSV is being read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotKind {
    Detections,
    GroundTruth,
}

/// Result of parsing one MOT file: boxes keyed by 0-based frame index, plus
/// the number of rows dropped for having non-positive width or height.
#[derive(Debug, Clone, Default)]
pub struct MotParse {
    pub per_frame: BTreeMap<usize, Vec<BoundingBox>>,
    pub rejected_rows: usize,
}

/// Parses MOT CSV text: `frame,id,left,top,width,height,conf,...` with at
/// least 7 fields per row and 1-based frame numbers.
///
/// Frame indices are re-based to 0. For [`MotKind::GroundTruth`], rows whose
/// `conf` field is 0 are excluded (the convention for ignored entries), and
/// class/visibility fields are ignored. Confidences are clamped to `[0, 1]`.
/// Rows with non-positive width or height are dropped and counted in
/// `rejected_rows`; any other malformed row is an error naming its line.
pub fn parse_mot(text: &str, kind: MotKind) -> Result<MotParse> {
    let mut out = MotParse::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 7 {
            return Err(Error::parse(
                line_no,
                format!(
                    "expected at least 7 comma-separated fields, got {}",
                    fields.len()
                ),
            ));
        }
        let frame: i64 = fields[0]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad frame index {:?}", fields[0])))?;
        if frame < 1 {
            return Err(Error::parse(
                line_no,
                format!("frame index must be >= 1, got {frame}"),
            ));
        }
        let mut nums = [0.0f64; 5];
        for (slot, &field) in nums.iter_mut().zip(&fields[2..7]) {
            *slot = field
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad numeric field {field:?}")))?;
        }
        let [left, top, width, height, conf] = nums;
        if kind == MotKind::GroundTruth && conf == 0.0 {
            continue;
        }
        if width <= 0.0 || height <= 0.0 {
            out.rejected_rows += 1;
            continue;
        }
        let confidence = conf.clamp(0.0, 1.0);
        let b = BoundingBox::new(left, top, width, height, confidence)
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
        out.per_frame.entry(frame as usize - 1).or_default().push(b);
    }
    Ok(out)
}

/// Serializes a per-frame box map back to MOT CSV text (1-based frames,
/// `id` of −1, world coordinates of −1). Re-parsing the output as
/// [`MotKind::Detections`] yields an identical map.
pub fn write_mot(per_frame: &BTreeMap<usize, Vec<BoundingBox>>) -> String {
    let mut out = String::new();
    for (frame, boxes) in per_frame {
        for b in boxes {
            let _ = writeln!(
                out,
                "{},-1,{},{},{},{},{},-1,-1,-1",
                frame + 1,
                b.left,
                b.top,
                b.width,
                b.height,
                b.confidence
            );
        }
    }
    out
}

/// Parses a latency sidecar CSV of `frame_index,latency_seconds` rows with
/// 0-based frame indices. A `frame_index,...` header line is skipped.
pub fn parse_latency_csv(text: &str) -> Result<BTreeMap<usize, f64>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with("frame_index") {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let frame: usize = parts
            .next()
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::parse(line_no, "bad frame index"))?;
        let latency: f64 = parts
            .next()
            .ok_or_else(|| Error::parse(line_no, "missing latency column"))?
            .parse()
            .map_err(|_| Error::parse(line_no, "bad latency value"))?;
        if !(latency > 0.0 && latency.is_finite()) {
            return Err(Error::parse(
                line_no,
                format!("latency must be positive, got {latency}"),
            ));
        }
        map.insert(frame, latency);
    }
    Ok(map)
}

/// Serializes a latency map to the sidecar CSV format.
pub fn write_latency_csv(map: &BTreeMap<usize, f64>) -> String {
    let mut out = String::from("frame_index,latency_seconds\n");
    for (frame, latency) in map {
        let _ = writeln!(out, "{frame},{latency}");
    }
    out
}
