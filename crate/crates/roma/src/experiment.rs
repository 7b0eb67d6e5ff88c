//! Experiment execution: policy-by-case sweeps, output files, and
//! aggregation.
//!
//! A sweep writes one directory per `(policy, case)` pair containing the
//! MOT-format output boxes, a telemetry CSV, and the AP report, plus a
//! top-level `summary.csv` and `deployment.csv` and a verbatim copy of the
//! config. All files are byte-deterministic for a fixed config and seed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{policy_name, PolicyKind, PolicySection, ResolvedExperiment};
use crate::error::{Error, Result};
use crate::evaluation::{realtime_ap, ApReport};
use crate::policy::{LadPolicy, OverheadModel, Policy, RomaPolicy, StaticPolicy, TodPolicy};
use crate::prior::{build_prior, PriorModel};
use crate::simulator::{run_simulation, SimulationRun, SimulatorConfig, WorkloadSchedule};
use crate::synthetic::{generate_synthetic_scenario, ScenarioSpec};
use crate::trace::{write_latency_csv, write_mot, LatencyProfile};

/// One scored `(policy, case)` cell of a sweep.
#[derive(Debug, Clone)]
pub struct ExperimentCell {
    pub policy: String,
    pub case_name: String,
    pub report: ApReport,
    /// Fraction of analyzed frames each detector handled.
    pub selection_fractions: Vec<f64>,
    pub analyzed_frames: usize,
}

/// In-memory result of a sweep, mirroring the files on disk.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub cells: Vec<ExperimentCell>,
    pub summary_csv: String,
    pub deployment_csv: String,
    pub output_dir: PathBuf,
}

impl ExperimentReport {
    pub fn ap(&self, policy: &str, case_name: &str) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.policy == policy && c.case_name == case_name)
            .map(|c| c.report.ap)
    }

    /// Mean AP of one policy across every case.
    pub fn mean_ap(&self, policy: &str) -> Option<f64> {
        let aps: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.policy == policy)
            .map(|c| c.report.ap)
            .collect();
        if aps.is_empty() {
            None
        } else {
            Some(aps.iter().sum::<f64>() / aps.len() as f64)
        }
    }
}

fn build_policy(section: &PolicySection, exp: &ResolvedExperiment) -> Result<Box<dyn Policy>> {
    match section.kind {
        PolicyKind::Static => {
            let name = section
                .detector
                .as_deref()
                .ok_or_else(|| Error::config("static policy needs a detector name"))?;
            let index = exp
                .detector_index(name)
                .ok_or_else(|| Error::config(format!("unknown detector {name:?}")))?;
            Ok(Box::new(StaticPolicy::new(
                index,
                exp.traces.len(),
                name.to_string(),
            )?))
        }
        PolicyKind::Tod => Ok(Box::new(TodPolicy::with_default_mapping(
            exp.boundaries.clone(),
            &exp.detector_order,
        )?)),
        PolicyKind::Lad => Ok(Box::new(LadPolicy::new(exp.detector_order.clone())?)),
        PolicyKind::Roma => {
            let prior = exp
                .prior
                .clone()
                .ok_or_else(|| Error::config("roma policy needs a prior"))?;
            let overhead = OverheadModel {
                kappa: section.overhead_kappa.unwrap_or(0.0),
            };
            Ok(Box::new(RomaPolicy::new(
                prior,
                exp.nominal_latencies.clone(),
                exp.meta.fps,
                exp.survival_iou_threshold,
                overhead,
            )?))
        }
    }
}

/// Runs one `(policy, case)` simulation without touching the filesystem.
pub fn run_cell(
    exp: &ResolvedExperiment,
    section: &PolicySection,
    schedule: &WorkloadSchedule,
) -> Result<SimulationRun> {
    let mut policy = build_policy(section, exp)?;
    run_simulation(
        &exp.traces,
        &exp.meta,
        schedule,
        policy.as_mut(),
        &SimulatorConfig {
            confidence_threshold: exp.confidence_threshold,
        },
    )
}

/// Executes the full sweep and writes all artifacts under the experiment's
/// output directory.
pub fn run_experiment(exp: &ResolvedExperiment) -> Result<ExperimentReport> {
    let gt = exp
        .ground_truth
        .as_ref()
        .ok_or_else(|| Error::config("simulation needs ground truth to score against"))?;

    fs::create_dir_all(&exp.output_dir)?;
    fs::write(exp.output_dir.join("config.toml"), &exp.raw_config)?;

    let mut cells = Vec::new();
    for section in &exp.policies {
        let name = policy_name(section);
        for (case_name, schedule) in &exp.cases {
            let run = run_cell(exp, section, schedule)?;
            let report = realtime_ap(&run, gt, exp.eval_iou_threshold, exp.confidence_threshold)?;
            let cell_dir = exp.output_dir.join(&name).join(case_name);
            fs::create_dir_all(&cell_dir)?;
            fs::write(
                cell_dir.join("detections.txt"),
                write_mot(&run.output_map()),
            )?;
            fs::write(cell_dir.join("telemetry.csv"), telemetry_csv(&run))?;
            fs::write(
                cell_dir.join("ap.json"),
                serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
            )?;
            if !run.telemetry.is_empty() {
                fs::write(
                    cell_dir.join("estimator.csv"),
                    estimator_csv(&run, exp.traces.len()),
                )?;
            }
            cells.push(ExperimentCell {
                policy: name.clone(),
                case_name: case_name.clone(),
                report,
                selection_fractions: run.selection_fractions(exp.traces.len()),
                analyzed_frames: run.analyzed.len(),
            });
        }
    }

    let summary_csv = summary_csv(&cells, &exp.cases);
    let deployment_csv = deployment_csv(&cells, &exp.detector_names);
    fs::write(exp.output_dir.join("summary.csv"), &summary_csv)?;
    fs::write(exp.output_dir.join("deployment.csv"), &deployment_csv)?;

    Ok(ExperimentReport {
        cells,
        summary_csv,
        deployment_csv,
        output_dir: exp.output_dir.clone(),
    })
}

/// One row per analyzed frame.
fn telemetry_csv(run: &SimulationRun) -> String {
    let mut out =
        String::from("t,frame,detector,simulated_latency,block_size,next_detector,overhead\n");
    for a in &run.analyzed {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            a.t,
            a.frame_index,
            a.detector,
            a.simulated_latency,
            a.block_size,
            a.next_detector,
            a.overhead
        );
    }
    out
}

/// Estimator internals per analyzed frame; vector-valued fields get one
/// column per detector.
fn estimator_csv(run: &SimulationRun, pool: usize) -> String {
    let mut out = String::from("t,frame,current,measured_latency,surviving,missing_per_frame");
    for field in ["latency", "block", "alpha", "gamma", "rap"] {
        for i in 0..pool {
            let _ = write!(out, ",{field}_{i}");
        }
    }
    out.push_str(",chosen\n");
    for s in &run.telemetry {
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            s.t,
            s.frame_index,
            s.current_detector,
            s.measured_latency,
            s.surviving.map_or(String::new(), |v| v.to_string()),
            s.missing_per_frame.map_or(String::new(), |v| v.to_string()),
        );
        for v in &s.latency_estimates {
            let _ = write!(out, ",{v}");
        }
        for v in &s.block_sizes {
            let _ = write!(out, ",{v}");
        }
        for v in &s.alpha {
            let _ = write!(out, ",{v}");
        }
        for v in &s.gamma {
            let _ = write!(out, ",{v}");
        }
        for v in &s.rap {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{}", s.chosen);
    }
    out
}

/// Policies as rows, cases as columns, plus a trailing per-policy mean.
fn summary_csv(cells: &[ExperimentCell], cases: &[(String, WorkloadSchedule)]) -> String {
    let mut out = String::from("policy");
    for (case_name, _) in cases {
        let _ = write!(out, ",{case_name}");
    }
    out.push_str(",average\n");
    let mut policies: Vec<&str> = Vec::new();
    for c in cells {
        if !policies.contains(&c.policy.as_str()) {
            policies.push(&c.policy);
        }
    }
    for policy in policies {
        let _ = write!(out, "{policy}");
        let mut sum = 0.0;
        let mut count = 0usize;
        for (case_name, _) in cases {
            let ap = cells
                .iter()
                .find(|c| c.policy == policy && c.case_name == *case_name)
                .map(|c| c.report.ap)
                .unwrap_or(f64::NAN);
            sum += ap;
            count += 1;
            let _ = write!(out, ",{ap}");
        }
        let _ = writeln!(out, ",{}", sum / count as f64);
    }
    out
}

/// Selection fraction of every detector for every `(policy, case)` pair.
fn deployment_csv(cells: &[ExperimentCell], detector_names: &[String]) -> String {
    let mut out = String::from("policy,case,detector,fraction\n");
    for cell in cells {
        for (name, fraction) in detector_names.iter().zip(&cell.selection_fractions) {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                cell.policy, cell.case_name, name, fraction
            );
        }
    }
    out
}

/// Builds a prior from a resolved source and writes it as the versioned text
/// format.
pub fn build_prior_file(exp: &ResolvedExperiment, out_path: &Path) -> Result<PriorModel> {
    let prior = build_prior(
        &exp.traces,
        &exp.boundaries,
        &exp.meta,
        exp.confidence_threshold,
    )?;
    if let Some(parent) = out_path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(out_path, prior.to_text())?;
    Ok(prior)
}

/// Generates a scenario's ground truth and traces and writes them as
/// MOT-format files plus latency sidecars.
///
/// Returns the written file names: ground truth first, then one detections
/// file and one latency file per detector.
pub fn generate_scenario_files(
    spec: &ScenarioSpec,
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let (gt, traces, meta) = generate_synthetic_scenario(spec, seed)?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let gt_path = out_dir.join("gt.txt");
    fs::write(&gt_path, write_mot(&gt.per_frame))?;
    written.push(gt_path);

    for (trace, det) in traces.iter().zip(&spec.detectors) {
        let det_path = out_dir.join(format!("{}.txt", det.name));
        let map = trace
            .per_frame
            .iter()
            .filter(|(_, d)| !d.boxes.is_empty())
            .map(|(f, d)| (*f, d.boxes.clone()))
            .collect();
        fs::write(&det_path, write_mot(&map))?;
        written.push(det_path);

        let lat_path = out_dir.join(format!("{}_latency.csv", det.name));
        let latencies = match &trace.latency {
            LatencyProfile::Constant(s) => (0..meta.frame_count).map(|f| (f, *s)).collect(),
            LatencyProfile::PerFrame(map) => map.clone(),
        };
        fs::write(&lat_path, write_latency_csv(&latencies))?;
        written.push(lat_path);
    }
    Ok(written)
}

/// Re-aggregates `ap.json` files under an experiment directory into a
/// summary CSV (policies and cases in lexicographic order).
pub fn aggregate_directory(dir: &Path) -> Result<String> {
    let mut rows: std::collections::BTreeMap<String, std::collections::BTreeMap<String, f64>> =
        std::collections::BTreeMap::new();
    let mut case_names: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for policy_entry in read_sorted_dirs(dir)? {
        let policy = dir_name(&policy_entry);
        for case_entry in read_sorted_dirs(&policy_entry)? {
            let ap_path = case_entry.join("ap.json");
            if !ap_path.exists() {
                continue;
            }
            let report: ApReport = serde_json::from_str(&fs::read_to_string(&ap_path)?)
                .map_err(|e| Error::config(format!("bad {}: {e}", ap_path.display())))?;
            let case_name = dir_name(&case_entry);
            case_names.insert(case_name.clone());
            rows.entry(policy.clone())
                .or_default()
                .insert(case_name, report.ap);
        }
    }
    if rows.is_empty() {
        return Err(Error::config(format!(
            "no ap.json files under {}",
            dir.display()
        )));
    }
    let mut out = String::from("policy");
    for case in &case_names {
        let _ = write!(out, ",{case}");
    }
    out.push_str(",average\n");
    for (policy, cases) in &rows {
        let _ = write!(out, "{policy}");
        let mut sum = 0.0;
        for case in &case_names {
            let ap = cases.get(case).copied().unwrap_or(f64::NAN);
            sum += ap;
            let _ = write!(out, ",{ap}");
        }
        let _ = writeln!(out, ",{}", sum / case_names.len() as f64);
    }
    Ok(out)
}

fn read_sorted_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

fn dir_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}
