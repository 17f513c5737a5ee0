//! Command implementations behind the `roadfuzz` binary: seed generation,
//! search runs with their output directory, frame replay and run reports.

mod replay;
mod report;
mod run;

pub use replay::{cmd_replay, render_frame, render_summary, select_frames};
pub use report::{cmd_report, ReportRow, ReportSummary};
pub use run::{cmd_run, load_run_config, RunConfig, RunOutcome};

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::network::bundled_network;
use crate::scenario::serialize_scenario;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    /// The run started but did not finish; its directory holds what was done.
    #[error("run aborted ({}): {message}", run_dir.display())]
    Aborted { run_dir: PathBuf, message: String },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Write `num` seed scenarios for `town` into `out_dir` as `<id>.json`.
/// Returns the written paths together with one summary line per seed.
pub fn cmd_seed_generate(
    num: usize,
    town: &str,
    min_length: f64,
    max_length: f64,
    rng_seed: u64,
    out_dir: &Path,
) -> Result<Vec<(PathBuf, String)>, CliError> {
    let net = bundled_network(town).map_err(|e| CliError::Input(e.to_string()))?;
    let seeds = net
        .generate_seed_scenarios(num, min_length, max_length, rng_seed)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let mut out = Vec::with_capacity(seeds.len());
    for s in &seeds {
        let path = out_dir.join(format!("{}.json", s.scenario_id));
        write_file(&path, &serialize_scenario(s))?;
        let line = format!(
            "{} route_length={:.1} m",
            s.scenario_id,
            s.ego_vehicles[0].route.length()
        );
        out.push((path, line));
    }
    Ok(out)
}
