//! Experiment runner behind the `kondra-lab` command line tool.

pub mod config;
mod experiments;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, ExperimentKind, RawConfig};
pub use report::{Cell, Fit, Report, Status, Table, Verdict, SCHEMA};

use crate::error::{Error, Result};

/// Command-line settings that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub levels: Option<usize>,
}

/// Reads and resolves a config file; every error here is a config error.
pub fn load_config(path: &Path, kind: ExperimentKind, overrides: &Overrides) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut raw = RawConfig::parse(&text)?;
    if let Some(out) = &overrides.out {
        raw.set("output.dir", &out.to_string_lossy());
    }
    if let Some(levels) = overrides.levels {
        raw.set("mesh.levels", &levels.to_string());
    }
    raw.resolve(kind)
}

/// Runs the experiment in memory; a computational failure leaves a partial report.
pub fn execute(cfg: &ExperimentConfig) -> Report {
    let mut report = Report::new(cfg);
    if let Err(e) = experiments::dispatch(cfg, &mut report) {
        report.fail(&e);
    }
    report
}

/// Runs the experiment and writes its artifacts into the configured output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Report {
    let mut report = execute(cfg);
    if let Err(e) = report.write(&cfg.output.dir) {
        report.fail(&e);
    }
    report
}

/// Process exit status for a finished report.
pub fn exit_code(report: &Report) -> i32 {
    match report.status {
        Status::Ok => 0,
        Status::Failed => 1,
    }
}
