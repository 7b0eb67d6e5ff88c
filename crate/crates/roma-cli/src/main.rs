//! Experiment front end: build priors, generate synthetic scenarios, run
//! policy-by-case sweeps, and aggregate results.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use roma::config::{ExperimentConfigFile, Overrides};
use roma::experiment;
use roma::synthetic::ScenarioSpec;

#[derive(Debug, Parser)]
#[command(
    name = "roma",
    about = "Run-time detector selection experiments over detection traces",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build an offline size prior from a config's video or synthetic source.
    BuildPrior {
        /// Experiment config describing the offline traces.
        #[arg(long)]
        config: PathBuf,
        /// Where to write the prior text file.
        #[arg(long)]
        out: PathBuf,
        /// Override the config's seed (synthetic sources only).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every configured policy against every workload case and score
    /// real-time AP.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the source's frame rate.
        #[arg(long)]
        fps: Option<f64>,
        /// Run only the named policies (repeatable).
        #[arg(long = "policy")]
        policies: Vec<String>,
        /// Run only the named cases (repeatable).
        #[arg(long = "case")]
        cases: Vec<String>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate ground truth, detection files, and latency sidecars from a
    /// scenario spec.
    GenSynthetic {
        /// Scenario spec TOML file.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for the generated files.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Re-aggregate the AP reports under an experiment directory into a
    /// summary CSV.
    Compare {
        /// Experiment output directory.
        #[arg(long)]
        dir: PathBuf,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::BuildPrior { config, out, seed } => {
            let overrides = Overrides {
                seed,
                ..Overrides::default()
            };
            let resolved = ExperimentConfigFile::load(&config, &overrides)
                .with_context(|| format!("loading {}", config.display()))?;
            let prior = experiment::build_prior_file(&resolved, &out)?;
            println!(
                "wrote prior for {} detectors x {} regions to {}",
                prior.detector_count(),
                prior.region_count(),
                out.display()
            );
        }
        Command::Simulate {
            config,
            seed,
            fps,
            policies,
            cases,
            out,
        } => {
            let overrides = Overrides {
                seed,
                fps,
                output_dir: out,
                policies: (!policies.is_empty()).then_some(policies),
                cases: (!cases.is_empty()).then_some(cases),
            };
            let resolved = ExperimentConfigFile::load(&config, &overrides)
                .with_context(|| format!("loading {}", config.display()))?;
            let report = experiment::run_experiment(&resolved)?;
            print!("{}", report.summary_csv);
            println!("artifacts under {}", report.output_dir.display());
        }
        Command::GenSynthetic {
            scenario,
            seed,
            out_dir,
        } => {
            let text = std::fs::read_to_string(&scenario)
                .with_context(|| format!("reading {}", scenario.display()))?;
            let spec = ScenarioSpec::from_toml(&text)?;
            let files = experiment::generate_scenario_files(&spec, seed, &out_dir)?;
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Compare { dir, out } => {
            let csv = experiment::aggregate_directory(&dir)?;
            match out {
                Some(path) => {
                    std::fs::write(&path, &csv)?;
                    println!("wrote {}", path.display());
                }
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}
