//! Command-line driver: configuration, experiments and report files.
//!
//! ```text
//! blowlab <experiment> --config <path> [--key value ...]
//! ```
//!
//! Exit codes are `0` when every check passes, `2` when a check fails and
//! `1` on any error. `BLOWLAB_OUT` replaces the configured output directory.

pub mod config;
pub mod experiments;
pub mod report;
pub mod svg;

use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{Experiment, ExperimentConfig, RawConfig, KEYS};
pub use report::{emit_report, Check, ExperimentResult, Formats, Table};

use crate::error::Result;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAIL: i32 = 2;

/// Build a config from the experiment name, an optional file and flags.
pub fn load_config(experiment: &str, path: Option<&Path>, flags: &[String]) -> Result<ExperimentConfig> {
    let exp: Experiment = experiment.parse()?;
    let mut raw = match path {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::default(),
    };
    raw.apply_flags(flags)?;
    ExperimentConfig::from_raw(exp, &raw)
}

/// Output directory after the environment override.
pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    let base = std::env::var_os("BLOWLAB_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| cfg.out.clone());
    base.join(cfg.experiment.name())
}

/// Outcome of a finished run.
#[derive(Debug)]
pub struct RunOutcome {
    pub pass: bool,
    pub files: Vec<PathBuf>,
    pub result: ExperimentResult,
}

/// Run one experiment and write its report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    let mut result = experiments::execute(cfg)?;
    result
        .metrics
        .insert("elapsed_s".into(), serde_json::json!(start.elapsed().as_secs_f64()));
    let files = emit_report(
        std::slice::from_ref(&result),
        Formats {
            csv: true,
            svg: cfg.plots,
        },
        &output_dir(cfg),
    )?;
    Ok(RunOutcome {
        pass: result.pass(),
        files,
        result,
    })
}

/// Run and translate the outcome into an exit code, reporting on stderr.
pub fn run(cfg: &ExperimentConfig) -> i32 {
    match run_experiment(cfg) {
        Ok(out) => {
            for c in out.result.checks.iter().filter(|c| !c.pass) {
                eprintln!(
                    "FAIL {}: {} (threshold {}, {})",
                    c.name, c.value, c.threshold, c.relation
                );
            }
            println!(
                "{} {} ({} checks), report in {}",
                cfg.experiment,
                if out.pass { "PASS" } else { "FAIL" },
                out.result.checks.len(),
                output_dir(cfg).display()
            );
            if out.pass {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// Entry point shared by the binary and the tests.
pub fn main_with(experiment: &str, config: Option<&Path>, flags: &[String]) -> i32 {
    match load_config(experiment, config, flags) {
        Ok(cfg) => run(&cfg),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
