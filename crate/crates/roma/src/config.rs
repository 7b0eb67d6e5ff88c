//! Experiment configuration: a versioned TOML schema describing the video
//! source, the detector pool, workload cases, and the policies to sweep.
//!
//! Paths inside a config are resolved relative to the config file. Every
//! field a run depends on lives either in the config or in the seed, so a
//! run is reproducible from those two alone.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RegionBoundaries;
use crate::prior::PriorModel;
use crate::simulator::WorkloadSchedule;
use crate::synthetic::{generate_synthetic_scenario, ScenarioSpec};
use crate::trace::{
    parse_latency_csv, parse_mot, DetectionTrace, GroundTruth, LatencyProfile, MotKind, VideoMeta,
};

fn default_version() -> u32 {
    1
}

fn default_confidence() -> f64 {
    0.3
}

fn default_iou() -> f64 {
    0.5
}

/// Default workload cases: no background load, then increasingly heavy
/// contention modeled as constant latency multipliers.
pub const DEFAULT_CASES: [(&str, f64); 4] = [("a", 1.0), ("b", 1.4), ("c", 1.8), ("d", 2.6)];

/// On-disk experiment description. See the repository book for the schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfigFile {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Overrides the source's frame rate when set.
    #[serde(default)]
    pub fps: Option<f64>,
    #[serde(default = "default_confidence")]
    pub confidence_threshold: f64,
    /// IoU threshold for the survival count between analyzed frames.
    #[serde(default = "default_iou")]
    pub survival_iou_threshold: f64,
    /// IoU threshold for evaluation matching.
    #[serde(default = "default_iou")]
    pub eval_iou_threshold: f64,
    #[serde(default)]
    pub synthetic: Option<SyntheticSource>,
    #[serde(default)]
    pub video: Option<VideoSource>,
    #[serde(default)]
    pub prior: Option<PriorSource>,
    #[serde(default)]
    pub boundaries: Option<BoundariesSection>,
    #[serde(default)]
    pub cases: Vec<CaseSection>,
    #[serde(default)]
    pub policies: Vec<PolicySection>,
}

/// Generate the video and traces from a scenario file instead of reading
/// detection files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub scenario: PathBuf,
}

/// Trace-file-backed video source.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoSource {
    pub frame_count: usize,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub ground_truth: Option<PathBuf>,
    pub detectors: Vec<DetectorFiles>,
}

/// One detector's trace files: MOT detections plus a latency, either constant
/// or from a sidecar CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorFiles {
    pub name: String,
    pub detections: PathBuf,
    #[serde(default)]
    pub latency: Option<f64>,
    #[serde(default)]
    pub latency_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSource {
    pub file: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundariesSection {
    pub thresholds: Vec<f64>,
    #[serde(default = "default_reference")]
    pub reference: (u32, u32),
}

fn default_reference() -> (u32, u32) {
    (640, 480)
}

/// One workload case: named segments of `(start_frame, multiplier)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSection {
    pub name: String,
    pub segments: Vec<(usize, f64)>,
}

/// One policy to run. `detector` names the fixed detector for `static`;
/// `overhead_kappa` tunes the decision-cost model for `roma`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub kind: PolicyKind,
    #[serde(default)]
    pub detector: Option<String>,
    #[serde(default)]
    pub overhead_kappa: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Roma,
    Static,
    Tod,
    Lad,
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub fps: Option<f64>,
    pub output_dir: Option<PathBuf>,
    /// Keep only the policies with these names.
    pub policies: Option<Vec<String>>,
    /// Keep only the cases with these names.
    pub cases: Option<Vec<String>>,
}

/// A fully loaded experiment: all files read, all names resolved.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    /// Verbatim text of the config file, copied into the output directory.
    pub raw_config: String,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub meta: VideoMeta,
    pub traces: Vec<DetectionTrace>,
    pub detector_names: Vec<String>,
    /// Nominal per-detector latency, seeding the estimator.
    pub nominal_latencies: Vec<f64>,
    /// Detector indices lightest to heaviest by nominal latency.
    pub detector_order: Vec<usize>,
    pub ground_truth: Option<GroundTruth>,
    pub prior: Option<PriorModel>,
    pub boundaries: RegionBoundaries,
    pub cases: Vec<(String, WorkloadSchedule)>,
    pub policies: Vec<PolicySection>,
    pub confidence_threshold: f64,
    pub survival_iou_threshold: f64,
    pub eval_iou_threshold: f64,
}

impl ExperimentConfigFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfigFile =
            toml::from_str(text).map_err(|e| Error::config(format!("bad config file: {e}")))?;
        if cfg.version != 1 {
            return Err(Error::config(format!(
                "unsupported config version {}",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    /// Reads, validates, and resolves a config file and everything it
    /// references.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<ResolvedExperiment> {
        let raw = std::fs::read_to_string(path)?;
        let cfg = Self::from_toml(&raw)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve(&raw, base, overrides)
    }

    pub fn resolve(
        &self,
        raw: &str,
        base_dir: &Path,
        overrides: &Overrides,
    ) -> Result<ResolvedExperiment> {
        for t in [
            self.confidence_threshold,
            self.survival_iou_threshold,
            self.eval_iou_threshold,
        ] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::config(format!("threshold {t} outside (0, 1]")));
            }
        }

        let seed = overrides.seed.unwrap_or(self.seed);
        let (mut meta, traces, names, ground_truth) = match (&self.synthetic, &self.video) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "config has both a synthetic source and a video source; pick one",
                ))
            }
            (None, None) => {
                return Err(Error::config(
                    "config needs a [synthetic] or [video] source",
                ))
            }
            (Some(synth), None) => {
                let scenario_path = base_dir.join(&synth.scenario);
                let text = std::fs::read_to_string(&scenario_path)?;
                let spec = ScenarioSpec::from_toml(&text)?;
                let (gt, traces, meta) = generate_synthetic_scenario(&spec, seed)?;
                let names = spec.detectors.iter().map(|d| d.name.clone()).collect();
                (meta, traces, names, Some(gt))
            }
            (None, Some(video)) => {
                let meta = VideoMeta::new(video.frame_count, video.fps, video.width, video.height)?;
                if video.detectors.is_empty() {
                    return Err(Error::config("video source lists no detectors"));
                }
                let mut traces = Vec::with_capacity(video.detectors.len());
                let mut names = Vec::with_capacity(video.detectors.len());
                for (i, det) in video.detectors.iter().enumerate() {
                    let text = std::fs::read_to_string(base_dir.join(&det.detections))?;
                    let parsed = parse_mot(&text, MotKind::Detections)?;
                    let latency = match (&det.latency, &det.latency_file) {
                        (Some(s), None) => LatencyProfile::Constant(*s),
                        (None, Some(f)) => {
                            let text = std::fs::read_to_string(base_dir.join(f))?;
                            LatencyProfile::PerFrame(parse_latency_csv(&text)?)
                        }
                        _ => {
                            return Err(Error::config(format!(
                                "detector {} needs exactly one of latency or latency_file",
                                det.name
                            )))
                        }
                    };
                    traces.push(DetectionTrace::from_parts(
                        i,
                        parsed.per_frame,
                        latency,
                        meta.frame_count,
                    )?);
                    names.push(det.name.clone());
                }
                let gt = match &video.ground_truth {
                    Some(p) => {
                        let text = std::fs::read_to_string(base_dir.join(p))?;
                        let parsed = parse_mot(&text, MotKind::GroundTruth)?;
                        Some(GroundTruth::new(parsed.per_frame))
                    }
                    None => None,
                };
                (meta, traces, names, gt)
            }
        };
        if let Some(fps) = overrides.fps.or(self.fps) {
            meta = VideoMeta::new(meta.frame_count, fps, meta.width, meta.height)?;
        }

        let nominal_latencies: Vec<f64> = traces
            .iter()
            .map(|t| t.latency.mean(meta.frame_count))
            .collect();
        let mut detector_order: Vec<usize> = (0..traces.len()).collect();
        detector_order.sort_by(|&a, &b| nominal_latencies[a].total_cmp(&nominal_latencies[b]));

        let prior = match &self.prior {
            Some(p) => {
                let text = std::fs::read_to_string(base_dir.join(&p.file))?;
                let prior = PriorModel::from_text(&text)?;
                if prior.detector_count() != traces.len() {
                    return Err(Error::config(format!(
                        "prior has {} detectors but the pool has {}",
                        prior.detector_count(),
                        traces.len()
                    )));
                }
                Some(prior)
            }
            None => None,
        };

        let boundaries = match (&prior, &self.boundaries) {
            (Some(p), _) => p.boundaries.clone(),
            (None, Some(b)) => RegionBoundaries::new(b.thresholds.clone(), b.reference)?,
            (None, None) => RegionBoundaries::default_three_region(),
        };

        let mut cases: Vec<(String, WorkloadSchedule)> = if self.cases.is_empty() {
            DEFAULT_CASES
                .iter()
                .map(|(name, m)| Ok((name.to_string(), WorkloadSchedule::constant(*m)?)))
                .collect::<Result<_>>()?
        } else {
            self.cases
                .iter()
                .map(|c| Ok((c.name.clone(), WorkloadSchedule::new(c.segments.clone())?)))
                .collect::<Result<_>>()?
        };
        if let Some(keep) = &overrides.cases {
            cases.retain(|(name, _)| keep.contains(name));
            if cases.is_empty() {
                return Err(Error::config("case filter matched nothing"));
            }
        }

        let mut policies = self.policies.clone();
        if policies.is_empty() {
            return Err(Error::config("config needs at least one policy"));
        }
        if let Some(keep) = &overrides.policies {
            policies.retain(|p| keep.contains(&policy_name(p)));
            if policies.is_empty() {
                return Err(Error::config("policy filter matched nothing"));
            }
        }
        {
            let mut seen = std::collections::BTreeSet::new();
            for p in &policies {
                if !seen.insert(policy_name(p)) {
                    return Err(Error::config(format!(
                        "duplicate policy name {:?}",
                        policy_name(p)
                    )));
                }
                if p.kind == PolicyKind::Static {
                    let wanted = p
                        .detector
                        .as_deref()
                        .ok_or_else(|| Error::config("static policy needs a detector name"))?;
                    if !names.iter().any(|n| n == wanted) {
                        return Err(Error::config(format!(
                            "static policy names unknown detector {wanted:?}"
                        )));
                    }
                }
                if p.kind == PolicyKind::Roma && prior.is_none() {
                    return Err(Error::config("a roma policy needs a prior file in [prior]"));
                }
            }
        }

        let output_dir = overrides
            .output_dir
            .clone()
            .or_else(|| self.output_dir.as_ref().map(|d| base_dir.join(d)))
            .ok_or_else(|| Error::config("no output directory given"))?;

        Ok(ResolvedExperiment {
            raw_config: raw.to_string(),
            output_dir,
            seed,
            meta,
            traces,
            detector_names: names,
            nominal_latencies,
            detector_order,
            ground_truth,
            prior,
            boundaries,
            cases,
            policies,
            confidence_threshold: self.confidence_threshold,
            survival_iou_threshold: self.survival_iou_threshold,
            eval_iou_threshold: self.eval_iou_threshold,
        })
    }
}

/// Display name of a configured policy: static policies go by their
/// detector's name, the rest by their kind.
pub fn policy_name(section: &PolicySection) -> String {
    match section.kind {
        PolicyKind::Roma => "roma".to_string(),
        PolicyKind::Tod => "tod".to_string(),
        PolicyKind::Lad => "lad".to_string(),
        PolicyKind::Static => section
            .detector
            .clone()
            .unwrap_or_else(|| "static".to_string()),
    }
}

impl ResolvedExperiment {
    pub fn detector_index(&self, name: &str) -> Option<usize> {
        self.detector_names.iter().position(|n| n == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_version() {
        let err = ExperimentConfigFile::from_toml("version = 9\n").unwrap_err();
        assert!(err.to_string().contains("version"));
    }

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfigFile::from_toml(
            r#"
version = 1
seed = 3
[synthetic]
scenario = "scenario.toml"
[[policies]]
kind = "lad"
"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.confidence_threshold, 0.3);
        assert_eq!(cfg.survival_iou_threshold, 0.5);
        assert!(cfg.cases.is_empty());
        assert_eq!(cfg.policies.len(), 1);
    }

    #[test]
    fn rejects_unknown_fields() {
        let err = ExperimentConfigFile::from_toml("version = 1\nbogus = true\n").unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn policy_names() {
        let static_section = PolicySection {
            kind: PolicyKind::Static,
            detector: Some("yt288".into()),
            overhead_kappa: None,
        };
        assert_eq!(policy_name(&static_section), "yt288");
        let roma_section = PolicySection {
            kind: PolicyKind::Roma,
            detector: None,
            overhead_kappa: None,
        };
        assert_eq!(policy_name(&roma_section), "roma");
    }
}
