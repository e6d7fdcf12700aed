//! Orchestration: stage order, exit codes, staged output promotion, and
//! quarantine of partial results.
//!
//! A full run executes the stages into a hidden staging directory and only
//! promotes the files into the output directory once every stage has
//! succeeded; on failure the partial artifacts move to `quarantine/` so the
//! output directory never mixes complete and incomplete runs.

use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

use crate::artifacts::{write_json_atomic, Manifest, Versions, MANIFEST_FILE};
use crate::config::PipelineConfig;
use crate::stages;

/// The seven pipeline stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Label,
    Series,
    Detect,
    Measure,
    Explain,
    Evaluate,
}

impl Stage {
    pub const PIPELINE: [Stage; 7] = [
        Stage::Ingest,
        Stage::Label,
        Stage::Series,
        Stage::Detect,
        Stage::Measure,
        Stage::Explain,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Label => "label",
            Stage::Series => "series",
            Stage::Detect => "detect",
            Stage::Measure => "measure",
            Stage::Explain => "explain",
            Stage::Evaluate => "evaluate",
        }
    }

    /// Process exit code for a failure in this stage: 3..=9 in pipeline
    /// order (0 is success, 2 is a configuration error).
    pub fn exit_code(self) -> u8 {
        3 + Stage::PIPELINE.iter().position(|s| *s == self).expect("listed") as u8
    }

    /// Run this stage against the artifact directory `dir`.
    pub fn run(self, config: &PipelineConfig, dir: &Path) -> Result<()> {
        match self {
            Stage::Ingest => stages::run_ingest(config, dir),
            Stage::Label => stages::run_label(config, dir),
            Stage::Series => stages::run_series(config, dir),
            Stage::Detect => stages::run_detect(config, dir),
            Stage::Measure => stages::run_measure(config, dir),
            Stage::Explain => stages::run_explain(config, dir),
            Stage::Evaluate => stages::run_evaluate(config, dir),
        }
    }
}

/// Failure modes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or run plumbing; exits 2.
    Config(anyhow::Error),
    /// A pipeline stage failed; exits with that stage's code.
    Stage(Stage, anyhow::Error),
    /// The report exporter failed on existing artifacts; exits 2.
    Report(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Report(_) => 2,
            CliError::Stage(stage, _) => stage.exit_code(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(err) => write!(f, "configuration error: {err:#}"),
            CliError::Stage(stage, err) => {
                write!(f, "stage `{}` failed: {err:#}", stage.name())
            }
            CliError::Report(err) => write!(f, "report failed: {err:#}"),
        }
    }
}

/// Write the run manifest recording the resolved config hash and versions.
pub fn write_manifest(config: &PipelineConfig, dir: &Path) -> Result<()> {
    let manifest = Manifest {
        config_hash: config.hash(),
        seed: config.seed,
        versions: Versions {
            moodpulse: env!("CARGO_PKG_VERSION").to_string(),
            moodpulse_core: moodpulse_core::VERSION.to_string(),
        },
    };
    write_json_atomic(dir, MANIFEST_FILE, 6, &manifest)
}

/// Execute every stage in order and promote the artifacts on success.
pub fn run_pipeline(config: &PipelineConfig) -> Result<(), CliError> {
    let output = &config.paths.output;
    let staging = output.join(".staging");
    prepare_dirs(output, &staging).map_err(CliError::Config)?;

    for stage in Stage::PIPELINE {
        if let Err(err) = stage.run(config, &staging) {
            quarantine(output, &staging);
            return Err(CliError::Stage(stage, err));
        }
    }
    if let Err(err) = write_manifest(config, &staging) {
        quarantine(output, &staging);
        return Err(CliError::Config(err));
    }
    promote(&staging, output).map_err(CliError::Config)?;
    Ok(())
}

fn prepare_dirs(output: &Path, staging: &Path) -> Result<()> {
    fs::create_dir_all(output)
        .with_context(|| format!("creating output directory `{}`", output.display()))?;
    if staging.exists() {
        fs::remove_dir_all(staging)
            .with_context(|| format!("clearing `{}`", staging.display()))?;
    }
    fs::create_dir_all(staging)
        .with_context(|| format!("creating `{}`", staging.display()))?;
    Ok(())
}

/// Best-effort: move whatever the failed run produced into `quarantine/`;
/// an empty staging directory is simply removed.
fn quarantine(output: &Path, staging: &Path) {
    let has_files = fs::read_dir(staging)
        .map(|mut entries| entries.next().is_some())
        .unwrap_or(false);
    if !has_files {
        let _ = fs::remove_dir(staging);
        return;
    }
    let target = output.join("quarantine");
    if target.exists() {
        let _ = fs::remove_dir_all(&target);
    }
    if fs::rename(staging, &target).is_err() {
        eprintln!(
            "warning: could not quarantine partial outputs in `{}`",
            staging.display()
        );
    } else {
        eprintln!(
            "partial outputs quarantined in `{}`",
            target.display()
        );
    }
}

fn promote(staging: &Path, output: &Path) -> Result<()> {
    for entry in fs::read_dir(staging)
        .with_context(|| format!("listing `{}`", staging.display()))?
    {
        let entry = entry?;
        let destination = output.join(entry.file_name());
        fs::rename(entry.path(), &destination)
            .with_context(|| format!("promoting `{}`", destination.display()))?;
    }
    fs::remove_dir(staging)
        .with_context(|| format!("removing `{}`", staging.display()))?;
    Ok(())
}
