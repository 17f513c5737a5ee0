use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::run::REPORT_FILE;
use super::{read_file, write_file, CliError};
use crate::canon;
use crate::engine::{OracleKind, OracleVerdict, RunReport};

pub const TABLE_FILE: &str = "summary.csv";
const IND_FILES: [&str; 4] = ["scenario.json", "trace.json", "verdicts.json", "fitness.json"];

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub individual_id: String,
    pub generation: usize,
    pub termination: String,
    pub fitness: f64,
    pub agent_failure: bool,
    pub violated: Vec<OracleKind>,
    /// Relative to the run directory.
    pub trace_path: String,
}

#[derive(Debug, Clone, Default)]
pub struct ReportSummary {
    pub rows: Vec<ReportRow>,
    pub violations: BTreeMap<OracleKind, usize>,
    pub best_so_far: Vec<f64>,
    pub warnings: Vec<String>,
    pub table_path: PathBuf,
    pub text: String,
}

#[derive(Deserialize)]
struct FitnessDoc {
    individual_id: String,
    generation: usize,
    termination: String,
    fitness: f64,
    agent_failure: bool,
}

fn numbered(dir: &Path, prefix: &str) -> Vec<(usize, PathBuf)> {
    let mut out: Vec<(usize, PathBuf)> = fs::read_dir(dir)
        .into_iter()
        .flatten()
        .flatten()
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            let n = name.strip_prefix(prefix)?.parse().ok()?;
            e.path().is_dir().then_some((n, e.path()))
        })
        .collect();
    out.sort();
    out
}

fn read_row(run_dir: &Path, dir: &Path, warnings: &mut Vec<String>) -> Option<ReportRow> {
    let rel = dir.strip_prefix(run_dir).unwrap_or(dir).display().to_string();
    let missing: Vec<&str> = IND_FILES.iter().copied().filter(|f| !dir.join(f).is_file()).collect();
    if !missing.is_empty() {
        warnings.push(format!("{rel}: missing {}", missing.join(", ")));
    }
    let fit: FitnessDoc = match read_file(&dir.join("fitness.json")).map(|t| serde_json::from_str(&t)) {
        Ok(Ok(f)) => f,
        Ok(Err(e)) => {
            warnings.push(format!("{rel}/fitness.json: {e}"));
            return None;
        }
        Err(_) => return None,
    };
    let verdicts: Vec<OracleVerdict> = match read_file(&dir.join("verdicts.json")).map(|t| serde_json::from_str(&t)) {
        Ok(Ok(v)) => v,
        Ok(Err(e)) => {
            warnings.push(format!("{rel}/verdicts.json: {e}"));
            Vec::new()
        }
        Err(_) => Vec::new(),
    };
    Some(ReportRow {
        individual_id: fit.individual_id,
        generation: fit.generation,
        termination: fit.termination,
        fitness: fit.fitness,
        agent_failure: fit.agent_failure,
        violated: verdicts.iter().filter(|v| v.violated).map(|v| v.oracle).collect(),
        trace_path: format!("{rel}/trace.json"),
    })
}

/// Totals and a per-individual table for a run directory. Incomplete
/// directories give a partial summary with warnings.
pub fn cmd_report(run_dir: &Path) -> Result<ReportSummary, CliError> {
    if !run_dir.is_dir() {
        return Err(CliError::Input(format!("not a directory: {}", run_dir.display())));
    }
    let mut sum = ReportSummary::default();
    for (_, gdir) in numbered(run_dir, "gen_") {
        for (_, idir) in numbered(&gdir, "ind_") {
            if let Some(row) = read_row(run_dir, &idir, &mut sum.warnings) {
                sum.rows.push(row);
            }
        }
    }
    for row in &sum.rows {
        for k in &row.violated {
            *sum.violations.entry(*k).or_default() += 1;
        }
    }
    let report: Option<RunReport> = match read_file(&run_dir.join(REPORT_FILE)) {
        Ok(t) => match serde_json::from_str(&t) {
            Ok(r) => Some(r),
            Err(e) => {
                sum.warnings.push(format!("{REPORT_FILE}: {e}"));
                None
            }
        },
        Err(_) => {
            sum.warnings.push(format!("{REPORT_FILE} missing"));
            None
        }
    };
    match &report {
        Some(r) => {
            sum.best_so_far = r.best_so_far();
            if r.executions() != sum.rows.len() {
                sum.warnings.push(format!(
                    "report lists {} executions but {} individual folders were read",
                    r.executions(),
                    sum.rows.len()
                ));
            }
            if let Some(why) = &r.aborted {
                sum.warnings.push(format!("run was aborted: {why}"));
            }
        }
        None => {
            // Rebuild the trajectory from the folders.
            let mut best = f64::INFINITY;
            let last_gen = sum.rows.iter().map(|r| r.generation).max();
            for g in 0..=last_gen.unwrap_or(0) {
                if last_gen.is_none() {
                    break;
                }
                for r in sum.rows.iter().filter(|r| r.generation == g) {
                    best = best.min(r.fitness);
                }
                sum.best_so_far.push(best);
            }
        }
    }

    let mut table =
        String::from("individual_id,generation,termination,fitness,agent_failure,collision,stuck,completion,trace\n");
    for r in &sum.rows {
        let has = |k| u8::from(r.violated.contains(&k));
        let _ = writeln!(
            table,
            "{},{},{},{},{},{},{},{},{}",
            r.individual_id,
            r.generation,
            r.termination,
            canon::format_f64(r.fitness),
            r.agent_failure,
            has(OracleKind::Collision),
            has(OracleKind::Stuck),
            has(OracleKind::Completion),
            r.trace_path
        );
    }
    sum.table_path = run_dir.join(TABLE_FILE);
    write_file(&sum.table_path, &table)?;

    let count = |k| sum.violations.get(&k).copied().unwrap_or(0);
    let mut text = String::new();
    let _ = writeln!(text, "run: {}", run_dir.display());
    let _ = writeln!(text, "scenarios executed: {}", sum.rows.len());
    let _ = writeln!(
        text,
        "violations: collision={} stuck={} completion={} (individuals with any: {})",
        count(OracleKind::Collision),
        count(OracleKind::Stuck),
        count(OracleKind::Completion),
        sum.rows.iter().filter(|r| !r.violated.is_empty()).count()
    );
    let _ = writeln!(
        text,
        "agent failures: {}",
        sum.rows.iter().filter(|r| r.agent_failure).count()
    );
    let traj: Vec<String> = sum.best_so_far.iter().map(|f| format!("{f:.3}")).collect();
    let _ = writeln!(text, "best fitness by generation: {}", traj.join(" "));
    let _ = writeln!(text, "table: {}", sum.table_path.display());
    for w in &sum.warnings {
        let _ = writeln!(text, "warning: {w}");
    }
    sum.text = text;
    Ok(sum)
}
