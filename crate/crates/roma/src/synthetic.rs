//! Deterministic synthetic scenarios: moving ground-truth objects plus
//! derived detector traces with controlled recall, latency, and box jitter.
//!
//! The generator is the test oracle for the whole pipeline. It can produce
//! every regime of interest — slow or fast objects, small or large objects,
//! light or heavy detectors — with outputs that are a pure function of the
//! scenario and the seed.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RegionBoundaries;
use crate::trace::{BoundingBox, DetectionTrace, GroundTruth, LatencyProfile, VideoMeta};

/// One stretch of video content: how many objects exist, how their sizes
/// distribute over the size regions, and how fast they move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    /// First frame of the segment (0 for the first segment).
    pub start_frame: usize,
    /// Objects alive throughout the segment.
    pub object_count: usize,
    /// Relative weight of each size region when sampling object areas;
    /// one entry per region.
    pub region_weights: Vec<f64>,
    /// Object speed in pixels per frame.
    pub speed: f64,
}

/// A simulated detector: its per-region recall, constant latency, and how
/// much its boxes wobble around the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub name: String,
    /// Detection latency in seconds.
    pub latency: f64,
    /// Probability of detecting an object, per size region.
    pub recall: Vec<f64>,
    /// Maximum box-position offset in pixels.
    #[serde(default)]
    pub jitter: f64,
}

fn scenario_version() -> u32 {
    1
}

/// Complete description of a synthetic benchmark scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    /// Schema version; currently 1.
    #[serde(default = "scenario_version")]
    pub version: u32,
    pub meta: VideoMeta,
    pub thresholds: Vec<f64>,
    pub reference: (u32, u32),
    pub segments: Vec<SegmentSpec>,
    pub detectors: Vec<DetectorSpec>,
}

impl ScenarioSpec {
    pub fn boundaries(&self) -> Result<RegionBoundaries> {
        RegionBoundaries::new(self.thresholds.clone(), self.reference)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != 1 {
            return Err(Error::config(format!(
                "unsupported scenario version {}",
                self.version
            )));
        }
        self.meta.validate()?;
        let boundaries = self.boundaries()?;
        let regions = boundaries.region_count();
        if self.segments.is_empty() {
            return Err(Error::config("scenario needs at least one segment"));
        }
        if self.segments[0].start_frame != 0 {
            return Err(Error::config("first segment must start at frame 0"));
        }
        for pair in self.segments.windows(2) {
            if pair[1].start_frame <= pair[0].start_frame {
                return Err(Error::config("segment starts must be strictly ascending"));
            }
        }
        for seg in &self.segments {
            if seg.start_frame >= self.meta.frame_count {
                return Err(Error::config(format!(
                    "segment start {} outside the video",
                    seg.start_frame
                )));
            }
            if seg.region_weights.len() != regions {
                return Err(Error::config(
                    "segment region_weights must have one entry per size region",
                ));
            }
            if seg
                .region_weights
                .iter()
                .any(|w| !(*w >= 0.0 && w.is_finite()))
            {
                return Err(Error::config("region weights must be non-negative"));
            }
            if seg.region_weights.iter().sum::<f64>() <= 0.0 {
                return Err(Error::config("region weights must not all be zero"));
            }
            if !(seg.speed >= 0.0 && seg.speed.is_finite()) {
                return Err(Error::config("object speed must be non-negative"));
            }
        }
        if self.detectors.is_empty() {
            return Err(Error::config("scenario needs at least one detector"));
        }
        for det in &self.detectors {
            if det.recall.len() != regions {
                return Err(Error::config(format!(
                    "detector {} needs one recall entry per size region",
                    det.name
                )));
            }
            if det.recall.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::config(format!(
                    "detector {} recall probabilities must be in [0, 1]",
                    det.name
                )));
            }
            if !(det.latency > 0.0 && det.latency.is_finite()) {
                return Err(Error::config(format!(
                    "detector {} latency must be positive",
                    det.name
                )));
            }
            if !(det.jitter >= 0.0 && det.jitter.is_finite()) {
                return Err(Error::config(format!(
                    "detector {} jitter must be non-negative",
                    det.name
                )));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario spec serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ScenarioSpec =
            toml::from_str(text).map_err(|e| Error::config(format!("bad scenario file: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }
}

struct MovingObject {
    left0: f64,
    top0: f64,
    side: f64,
    dx: f64,
    dy: f64,
    /// Per detector: whether this object is ever seen, and its fixed box
    /// offset when it is.
    visibility: Vec<Option<(f64, f64)>>,
}

impl MovingObject {
    fn box_at(&self, frames_elapsed: usize, meta: &VideoMeta) -> BoundingBox {
        let n = frames_elapsed as f64;
        let span_x = (meta.width as f64 - self.side).max(1.0);
        let span_y = (meta.height as f64 - self.side).max(1.0);
        let left = (self.left0 + self.dx * n).rem_euclid(span_x);
        let top = (self.top0 + self.dy * n).rem_euclid(span_y);
        BoundingBox::new(left, top, self.side, self.side, 1.0)
            .expect("generated boxes have positive size")
    }
}

/// Sampling range of object areas for one region: bounded below by the
/// region's threshold (or an 8th of the first threshold for the smallest
/// region) and above by the next threshold (or twice the last one).
fn region_area_range(region: usize, scaled: &[f64]) -> (f64, f64) {
    if scaled.is_empty() {
        return (400.0, 4096.0);
    }
    let lo = if region == 0 {
        (scaled[0] / 8.0).max(16.0)
    } else {
        scaled[region - 1]
    };
    let hi = if region == scaled.len() {
        scaled[scaled.len() - 1] * 2.0
    } else {
        scaled[region]
    };
    (lo, hi)
}

fn sample_region(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut pick = rng.gen_range(0.0..total);
    for (k, w) in weights.iter().enumerate() {
        if pick < *w {
            return k;
        }
        pick -= w;
    }
    weights.len() - 1
}

/// Generates ground truth and one trace per detector for the scenario.
///
/// Objects live for the duration of their segment, move in a fixed random
/// direction at the segment's speed, and wrap at the frame edges. Each
/// detector either sees an object for the object's whole lifetime (one
/// Bernoulli draw against the recall of the object's size region) or never,
/// with a fixed position offset drawn within the jitter magnitude. Output is
/// a pure function of `(spec, seed)`.
pub fn generate_synthetic_scenario(
    spec: &ScenarioSpec,
    seed: u64,
) -> Result<(GroundTruth, Vec<DetectionTrace>, VideoMeta)> {
    spec.validate()?;
    let meta = spec.meta;
    let boundaries = spec.boundaries()?;
    let scaled = boundaries.scaled_thresholds(&meta);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut gt: BTreeMap<usize, Vec<BoundingBox>> = BTreeMap::new();
    let mut dets: Vec<BTreeMap<usize, Vec<BoundingBox>>> =
        vec![BTreeMap::new(); spec.detectors.len()];

    for (s, seg) in spec.segments.iter().enumerate() {
        let seg_end = spec
            .segments
            .get(s + 1)
            .map_or(meta.frame_count, |next| next.start_frame);

        let objects: Vec<MovingObject> = (0..seg.object_count)
            .map(|_| {
                let region = sample_region(&seg.region_weights, &mut rng);
                let (lo, hi) = region_area_range(region, &scaled);
                let area = rng.gen_range(lo..hi);
                let max_side = (meta.width.min(meta.height) as f64 / 2.0).max(2.0);
                let side = area.sqrt().min(max_side);
                let left0 = rng.gen_range(0.0..(meta.width as f64 - side).max(1.0));
                let top0 = rng.gen_range(0.0..(meta.height as f64 - side).max(1.0));
                let angle = rng.gen_range(0.0..std::f64::consts::TAU);
                let visibility = spec
                    .detectors
                    .iter()
                    .map(|det| {
                        let keep = rng.gen_bool(det.recall[region]);
                        let offset = if det.jitter > 0.0 {
                            (
                                rng.gen_range(-det.jitter..=det.jitter),
                                rng.gen_range(-det.jitter..=det.jitter),
                            )
                        } else {
                            (0.0, 0.0)
                        };
                        keep.then_some(offset)
                    })
                    .collect();
                MovingObject {
                    left0,
                    top0,
                    side,
                    dx: seg.speed * angle.cos(),
                    dy: seg.speed * angle.sin(),
                    visibility,
                }
            })
            .collect();

        for frame in seg.start_frame..seg_end {
            let elapsed = frame - seg.start_frame;
            let mut gt_boxes = Vec::with_capacity(objects.len());
            for obj in &objects {
                let truth = obj.box_at(elapsed, &meta);
                for (d, vis) in obj.visibility.iter().enumerate() {
                    if let Some((jx, jy)) = vis {
                        let seen = BoundingBox::new(
                            (truth.left + jx).max(0.0),
                            (truth.top + jy).max(0.0),
                            truth.width,
                            truth.height,
                            1.0,
                        )
                        .expect("jittered boxes keep positive size");
                        dets[d].entry(frame).or_default().push(seen);
                    }
                }
                gt_boxes.push(truth);
            }
            gt.insert(frame, gt_boxes);
        }
    }

    let traces = dets
        .into_iter()
        .enumerate()
        .map(|(d, per_frame)| {
            DetectionTrace::from_parts(
                d,
                per_frame,
                LatencyProfile::Constant(spec.detectors[d].latency),
                meta.frame_count,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    Ok((GroundTruth::new(gt), traces, meta))
}
