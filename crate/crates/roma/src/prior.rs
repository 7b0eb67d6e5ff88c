//! The offline size prior: how many objects each detector finds per size
//! region on a held-out dataset, and the ratios that extrapolate one
//! detector's live counts to the rest of the pool.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{histogram, RegionBoundaries, SizeHistogram};
use crate::trace::{DetectionTrace, VideoMeta};

const PRIOR_FORMAT_HEADER: &str = "roma-prior v1";

/// Divisor substitute when a prior count is exactly zero, keeping detection
/// ratios finite. `0/0` is defined as 1.
const RATIO_ZERO_DIVISOR: f64 = 0.1;

/// Per-detector, per-region detected-object counts from an offline dataset.
///
/// Row `i` of `matrix` is detector `i`'s histogram summed over every frame of
/// the offline data. `detector_order` lists detector indices from lightest
/// (fastest) to heaviest, by nominal latency.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorModel {
    pub matrix: Vec<Vec<f64>>,
    pub boundaries: RegionBoundaries,
    pub detector_order: Vec<usize>,
}

impl PriorModel {
    pub fn new(
        matrix: Vec<Vec<f64>>,
        boundaries: RegionBoundaries,
        detector_order: Vec<usize>,
    ) -> Result<Self> {
        let n = matrix.len();
        if n == 0 {
            return Err(Error::config("prior needs at least one detector row"));
        }
        let regions = boundaries.region_count();
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != regions {
                return Err(Error::config(format!(
                    "prior row {i} has {} entries, expected {regions}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::config(format!(
                    "prior row {i} has a negative or non-finite entry"
                )));
            }
            if row.iter().all(|v| *v == 0.0) {
                return Err(Error::config(format!(
                    "prior row {i} is all zeros; the detector never fired on the offline data"
                )));
            }
        }
        let mut seen = vec![false; n];
        if detector_order.len() != n {
            return Err(Error::config("detector_order length must match row count"));
        }
        for &d in &detector_order {
            if d >= n || seen[d] {
                return Err(Error::config(
                    "detector_order must be a permutation of rows",
                ));
            }
            seen[d] = true;
        }
        Ok(PriorModel {
            matrix,
            boundaries,
            detector_order,
        })
    }

    pub fn detector_count(&self) -> usize {
        self.matrix.len()
    }

    pub fn region_count(&self) -> usize {
        self.boundaries.region_count()
    }

    /// Heaviest (slowest) detector; the default at start-up.
    pub fn heaviest(&self) -> usize {
        *self.detector_order.last().expect("order is non-empty")
    }

    /// Serializes to the versioned plain-text prior format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{PRIOR_FORMAT_HEADER}");
        let _ = writeln!(out, "detectors {}", self.detector_count());
        let _ = writeln!(out, "regions {}", self.region_count());
        let (rw, rh) = self.boundaries.reference();
        let _ = writeln!(out, "reference {rw} {rh}");
        let _ = writeln!(out, "thresholds{}", join_nums(self.boundaries.thresholds()));
        let order: Vec<String> = self.detector_order.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "order {}", order.join(" "));
        for row in &self.matrix {
            let _ = writeln!(out, "row{}", join_nums(row));
        }
        out
    }

    /// Parses the text format produced by [`PriorModel::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let expect = |item: Option<(usize, &str)>, key: &str| -> Result<(usize, String)> {
            match item {
                Some((idx, line)) if line.starts_with(key) => {
                    Ok((idx + 1, line[key.len()..].trim().to_string()))
                }
                Some((idx, line)) => Err(Error::parse(
                    idx + 1,
                    format!("expected {key:?} line, got {line:?}"),
                )),
                None => Err(Error::parse(0, format!("missing {key:?} line"))),
            }
        };
        expect(lines.next(), PRIOR_FORMAT_HEADER)?;
        let (line, detectors) = expect(lines.next(), "detectors")?;
        let n: usize = detectors
            .parse()
            .map_err(|_| Error::parse(line, "bad detector count"))?;
        let (line, regions) = expect(lines.next(), "regions")?;
        let h: usize = regions
            .parse()
            .map_err(|_| Error::parse(line, "bad region count"))?;
        let (line, reference) = expect(lines.next(), "reference")?;
        let dims: Vec<u32> = parse_nums(&reference, line)?;
        if dims.len() != 2 {
            return Err(Error::parse(line, "reference needs width and height"));
        }
        let (line, thresholds) = expect(lines.next(), "thresholds")?;
        let thresholds: Vec<f64> = parse_nums(&thresholds, line)?;
        if thresholds.len() + 1 != h {
            return Err(Error::parse(line, "threshold count does not match regions"));
        }
        let (line, order) = expect(lines.next(), "order")?;
        let order: Vec<usize> = parse_nums(&order, line)?;
        let mut matrix = Vec::with_capacity(n);
        for _ in 0..n {
            let (line, row) = expect(lines.next(), "row")?;
            let row: Vec<f64> = parse_nums(&row, line)?;
            if row.len() != h {
                return Err(Error::parse(line, "row length does not match regions"));
            }
            matrix.push(row);
        }
        let boundaries = RegionBoundaries::new(thresholds, (dims[0], dims[1]))?;
        PriorModel::new(matrix, boundaries, order)
    }
}

fn join_nums<T: std::fmt::Display>(values: &[T]) -> String {
    let mut out = String::new();
    for v in values {
        let _ = write!(out, " {v}");
    }
    out
}

fn parse_nums<T: std::str::FromStr>(text: &str, line: usize) -> Result<Vec<T>> {
    text.split_whitespace()
        .map(|tok| {
            tok.parse()
                .map_err(|_| Error::parse(line, format!("bad numeric token {tok:?}")))
        })
        .collect()
}

/// Per-region detected-count ratios of one detector relative to another.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRatios {
    pub ratios: Vec<f64>,
}

/// Builds a prior by summing every frame's size histogram per detector.
///
/// Detections below `confidence_threshold` are excluded so the prior counts
/// the same population the run-time measurement sees. Detectors are ordered
/// lightest to heaviest by mean nominal latency.
pub fn build_prior(
    traces: &[DetectionTrace],
    boundaries: &RegionBoundaries,
    frame: &VideoMeta,
    confidence_threshold: f64,
) -> Result<PriorModel> {
    if traces.is_empty() {
        return Err(Error::config("cannot build a prior from zero traces"));
    }
    let frames: Vec<usize> = traces[0].per_frame.keys().copied().collect();
    for t in traces {
        if t.per_frame.keys().copied().collect::<Vec<_>>() != frames {
            return Err(Error::config(format!(
                "trace for detector {} covers different frames than detector {}",
                t.detector_id, traces[0].detector_id
            )));
        }
    }
    let matrix = traces
        .iter()
        .map(|t| {
            let mut row = SizeHistogram::zeros(boundaries.region_count());
            for dets in t.per_frame.values() {
                let kept = dets.filtered(confidence_threshold);
                let h = histogram(&kept, boundaries, frame);
                for (acc, v) in row.counts.iter_mut().zip(&h.counts) {
                    *acc += v;
                }
            }
            row.counts
        })
        .collect();
    let mut order: Vec<usize> = (0..traces.len()).collect();
    order.sort_by(|&a, &b| {
        traces[a]
            .latency
            .mean(frame.frame_count)
            .total_cmp(&traces[b].latency.mean(frame.frame_count))
    });
    PriorModel::new(matrix, boundaries.clone(), order)
}

/// Per-region ratio of detector `i`'s prior counts to detector `c`'s.
///
/// A zero in `c`'s row would divide by zero; the entry becomes 1 when `i`'s
/// count is also zero, and `count / 0.1` otherwise.
pub fn detection_ratio(prior: &PriorModel, i: usize, c: usize) -> DetectionRatios {
    let ratios = prior.matrix[i]
        .iter()
        .zip(&prior.matrix[c])
        .map(|(&num, &den)| {
            if den == 0.0 {
                if num == 0.0 {
                    1.0
                } else {
                    num / RATIO_ZERO_DIVISOR
                }
            } else {
                num / den
            }
        })
        .collect();
    DetectionRatios { ratios }
}

/// Estimated number of objects detector `i` would have found, given the
/// histogram the current detector measured: the dot product of the ratio
/// vector with the observed histogram.
pub fn estimate_detected(ratios: &DetectionRatios, observed: &SizeHistogram) -> f64 {
    ratios
        .ratios
        .iter()
        .zip(&observed.counts)
        .map(|(r, p)| r * p)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{BoundingBox, LatencyProfile};
    use std::collections::BTreeMap;

    fn reference_matrix() -> Vec<Vec<f64>> {
        vec![
            vec![1921.0, 3550.0, 2748.0],
            vec![4603.0, 3872.0, 2488.0],
            vec![8502.0, 3506.0, 2982.0],
            vec![9526.0, 3603.0, 2993.0],
        ]
    }

    fn reference_prior() -> PriorModel {
        PriorModel::new(
            reference_matrix(),
            RegionBoundaries::default_three_region(),
            vec![0, 1, 2, 3],
        )
        .unwrap()
    }

    #[test]
    fn ratio_identity() {
        let prior = reference_prior();
        for i in 0..4 {
            assert_eq!(detection_ratio(&prior, i, i).ratios, vec![1.0, 1.0, 1.0]);
        }
    }

    #[test]
    fn ratio_lightest_to_heaviest() {
        let prior = reference_prior();
        let r = detection_ratio(&prior, 0, 3);
        let expected = [1921.0 / 9526.0, 3550.0 / 3603.0, 2748.0 / 2993.0];
        for (got, want) in r.ratios.iter().zip(expected) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn ratio_zero_division_conventions() {
        let prior = PriorModel::new(
            vec![vec![0.0, 10.0, 5.0], vec![0.0, 5.0, 5.0]],
            RegionBoundaries::default_three_region(),
            vec![0, 1],
        )
        .unwrap();
        // 0/0 -> 1, otherwise num / den.
        assert_eq!(detection_ratio(&prior, 0, 1).ratios, vec![1.0, 2.0, 1.0]);
        // A positive count over a zero divisor uses the 0.1 substitute.
        let prior = PriorModel::new(
            vec![vec![3.0, 1.0], vec![0.0, 1.0]],
            RegionBoundaries::new(vec![2500.0], (640, 480)).unwrap(),
            vec![0, 1],
        )
        .unwrap();
        assert_eq!(detection_ratio(&prior, 0, 1).ratios, vec![30.0, 1.0]);
    }

    #[test]
    fn estimate_is_dot_product() {
        let identity = DetectionRatios {
            ratios: vec![1.0, 1.0, 1.0],
        };
        let hist = SizeHistogram {
            counts: vec![2.0, 3.0, 4.0],
        };
        assert_eq!(estimate_detected(&identity, &hist), 9.0);

        let mixed = DetectionRatios {
            ratios: vec![0.5, 1.0, 2.0],
        };
        let hist = SizeHistogram {
            counts: vec![4.0, 2.0, 1.0],
        };
        assert_eq!(estimate_detected(&mixed, &hist), 6.0);

        let empty = SizeHistogram {
            counts: vec![0.0, 0.0, 0.0],
        };
        assert_eq!(estimate_detected(&mixed, &empty), 0.0);
    }

    #[test]
    fn estimate_is_linear_in_histogram() {
        let ratios = DetectionRatios {
            ratios: vec![0.3, 1.2, 2.5],
        };
        let a = SizeHistogram {
            counts: vec![4.0, 0.0, 2.0],
        };
        let b = SizeHistogram {
            counts: vec![1.0, 3.0, 5.0],
        };
        let combined = SizeHistogram {
            counts: a
                .counts
                .iter()
                .zip(&b.counts)
                .map(|(x, y)| 2.0 * x + y)
                .collect(),
        };
        let expected = 2.0 * estimate_detected(&ratios, &a) + estimate_detected(&ratios, &b);
        assert!((estimate_detected(&ratios, &combined) - expected).abs() < 1e-12);
    }

    #[test]
    fn build_prior_sums_frames() {
        let meta = VideoMeta::new(2, 30.0, 640, 480).unwrap();
        let boundaries = RegionBoundaries::default_three_region();
        let small = BoundingBox::new(0.0, 0.0, 10.0, 10.0, 1.0).unwrap();
        let mut per_frame = BTreeMap::new();
        per_frame.insert(0, vec![small, small]);
        let trace =
            DetectionTrace::from_parts(0, per_frame.clone(), LatencyProfile::Constant(0.1), 2)
                .unwrap();
        let prior = build_prior(std::slice::from_ref(&trace), &boundaries, &meta, 0.3).unwrap();
        assert_eq!(prior.matrix, vec![vec![2.0, 0.0, 0.0]]);

        // Two identical traces give two identical rows.
        let mut second = trace.clone();
        second.detector_id = 1;
        let prior = build_prior(&[trace, second], &boundaries, &meta, 0.3).unwrap();
        assert_eq!(prior.matrix[0], prior.matrix[1]);
    }

    #[test]
    fn build_prior_excludes_low_confidence() {
        let meta = VideoMeta::new(1, 30.0, 640, 480).unwrap();
        let boundaries = RegionBoundaries::default_three_region();
        let mut per_frame = BTreeMap::new();
        per_frame.insert(
            0,
            vec![
                BoundingBox::new(0.0, 0.0, 10.0, 10.0, 0.9).unwrap(),
                BoundingBox::new(0.0, 0.0, 10.0, 10.0, 0.2).unwrap(),
            ],
        );
        let trace =
            DetectionTrace::from_parts(0, per_frame, LatencyProfile::Constant(0.1), 1).unwrap();
        let prior = build_prior(&[trace], &boundaries, &meta, 0.3).unwrap();
        assert_eq!(prior.matrix, vec![vec![1.0, 0.0, 0.0]]);
    }

    #[test]
    fn build_prior_single_region_sums_everything() {
        let meta = VideoMeta::new(2, 30.0, 640, 480).unwrap();
        let boundaries = RegionBoundaries::new(vec![], (640, 480)).unwrap();
        let small = BoundingBox::new(0.0, 0.0, 10.0, 10.0, 1.0).unwrap();
        let large = BoundingBox::new(0.0, 0.0, 100.0, 100.0, 1.0).unwrap();
        let mut per_frame = BTreeMap::new();
        per_frame.insert(0, vec![small, large]);
        per_frame.insert(1, vec![large]);
        let trace =
            DetectionTrace::from_parts(0, per_frame, LatencyProfile::Constant(0.1), 2).unwrap();
        let prior = build_prior(std::slice::from_ref(&trace), &boundaries, &meta, 0.3).unwrap();
        assert_eq!(prior.matrix, vec![vec![3.0]]);
    }

    #[test]
    fn build_prior_orders_by_latency() {
        let meta = VideoMeta::new(1, 30.0, 640, 480).unwrap();
        let boundaries = RegionBoundaries::default_three_region();
        let mut per_frame = BTreeMap::new();
        per_frame.insert(
            0,
            vec![BoundingBox::new(0.0, 0.0, 10.0, 10.0, 1.0).unwrap()],
        );
        let slow =
            DetectionTrace::from_parts(0, per_frame.clone(), LatencyProfile::Constant(0.2), 1)
                .unwrap();
        let fast =
            DetectionTrace::from_parts(1, per_frame, LatencyProfile::Constant(0.05), 1).unwrap();
        let prior = build_prior(&[slow, fast], &boundaries, &meta, 0.3).unwrap();
        assert_eq!(prior.detector_order, vec![1, 0]);
        assert_eq!(prior.heaviest(), 0);
    }

    #[test]
    fn build_prior_rejects_empty_and_mismatched() {
        let meta = VideoMeta::new(2, 30.0, 640, 480).unwrap();
        let boundaries = RegionBoundaries::default_three_region();
        assert!(build_prior(&[], &boundaries, &meta, 0.3).is_err());

        let mut per_frame = BTreeMap::new();
        per_frame.insert(
            0,
            vec![BoundingBox::new(0.0, 0.0, 10.0, 10.0, 1.0).unwrap()],
        );
        let a = DetectionTrace::from_parts(0, per_frame.clone(), LatencyProfile::Constant(0.1), 2)
            .unwrap();
        let b = DetectionTrace::from_parts(1, per_frame, LatencyProfile::Constant(0.1), 1).unwrap();
        assert!(build_prior(&[a, b], &boundaries, &meta, 0.3).is_err());
    }

    #[test]
    fn text_round_trip() {
        let prior = reference_prior();
        let text = prior.to_text();
        let reparsed = PriorModel::from_text(&text).unwrap();
        assert_eq!(prior, reparsed);
    }

    #[test]
    fn text_rejects_garbage() {
        assert!(PriorModel::from_text("not a prior").is_err());
        let prior = reference_prior();
        let mangled = prior.to_text().replace("row 1921", "row x");
        assert!(PriorModel::from_text(&mangled).is_err());
    }
}
