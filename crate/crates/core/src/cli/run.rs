use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{read_file, write_file, CliError};
use crate::agents::{AgentBindings, DefaultAgentFactory};
use crate::canon;
use crate::engine::{
    run_search, Evaluation, GenerationSummary, Individual, RunReport, SearchError, SearchObserver, TesterConfig,
};
use crate::exec::{spawn_pool, PoolExecutor, PoolResources, WorkerPoolConfig};
use crate::network::{bundled_network, load_network, RoadNetwork};
use crate::scenario::{parse_scenario, serialize_scenario, Scenario, VehicleModelCatalog};
use crate::sim::{serialize_trace, SimConfig, Trace};

pub const SNAPSHOT_FILE: &str = "config_snapshot.toml";
pub const REPORT_FILE: &str = "report.json";
pub const GENERATIONS_FILE: &str = "generations.csv";

/// Contents of a run config file. Relative paths are taken from the
/// directory holding the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Name of the run directory under `output_root`; defaults to the config
    /// file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_name: Option<String>,
    pub output_root: PathBuf,
    /// Seed scenario document.
    pub scenario: PathBuf,
    /// Map file; when absent the bundled map named by the scenario is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<PathBuf>,
    /// Vehicle model catalog; the built-in one when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
    #[serde(default)]
    pub tester: TesterConfig,
    /// Ego id or `"*"` mapped to an agent reference.
    #[serde(default)]
    pub agent: AgentBindings,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub pool: WorkerPoolConfig,
}

fn absolutize(base: &Path, p: &Path) -> PathBuf {
    let joined = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    // Lexical cleanup only; the path may not exist yet.
    let mut out = PathBuf::new();
    for c in joined.components() {
        match c {
            std::path::Component::CurDir => {}
            std::path::Component::ParentDir => {
                out.pop();
            }
            other => out.push(other),
        }
    }
    out
}

fn must_exist(p: &Path, what: &str) -> Result<(), CliError> {
    if p.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{what} file not found: {}", p.display())))
    }
}

/// Parse and check a run config, resolving every path to an absolute one.
pub fn load_run_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = read_file(path)?;
    let de = toml::Deserializer::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut cfg: RunConfig = serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::Config(format!("{}: at {}: {}", path.display(), e.path(), e.inner())))?;
    let cwd = std::env::current_dir().map_err(|e| CliError::io(Path::new("."), e))?;
    let base = absolutize(&cwd, path.parent().unwrap_or(Path::new(".")));
    cfg.output_root = absolutize(&base, &cfg.output_root);
    cfg.scenario = absolutize(&base, &cfg.scenario);
    must_exist(&cfg.scenario, "scenario")?;
    if let Some(m) = cfg.map.take() {
        let m = absolutize(&base, &m);
        must_exist(&m, "map")?;
        cfg.map = Some(m);
    }
    if let Some(c) = cfg.catalog.take() {
        let c = absolutize(&base, &c);
        must_exist(&c, "catalog")?;
        cfg.catalog = Some(c);
    }
    if let Some(d) = cfg.pool.log_dir.take() {
        cfg.pool.log_dir = Some(absolutize(&base, &d));
    }
    if cfg.run_name.is_none() {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        cfg.run_name = Some(stem.to_string());
    }
    cfg.tester.check().map_err(CliError::Config)?;
    cfg.sim.check().map_err(CliError::Config)?;
    cfg.pool.check().map_err(CliError::Config)?;
    for (k, v) in &cfg.agent.map {
        crate::agents::AgentRef::parse(v).map_err(|e| CliError::Config(format!("agent.{k}: {e}")))?;
    }
    Ok(cfg)
}

/// Fresh directory `root/name`, or `root/name-1`, `-2`, ... when taken.
fn fresh_dir(root: &Path, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
    let mut n = 0;
    loop {
        let candidate = if n == 0 {
            root.join(name)
        } else {
            root.join(format!("{name}-{n}"))
        };
        match fs::create_dir(&candidate) {
            Ok(()) => return Ok(candidate),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => n += 1,
            Err(e) => return Err(CliError::io(&candidate, e)),
        }
    }
}

fn load_inputs(cfg: &RunConfig) -> Result<(Scenario, RoadNetwork, VehicleModelCatalog), CliError> {
    let seed = parse_scenario(&read_file(&cfg.scenario)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", cfg.scenario.display())))?;
    let net = match &cfg.map {
        Some(p) => load_network(p),
        None => bundled_network(&seed.map_region.town),
    }
    .map_err(|e| CliError::Input(e.to_string()))?;
    let catalog = match &cfg.catalog {
        Some(p) => VehicleModelCatalog::from_json(&read_file(p)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
        None => VehicleModelCatalog::builtin(),
    };
    Ok((seed, net, catalog))
}

struct DirObserver {
    run_dir: PathBuf,
    csv: File,
    engine_log: File,
    echo: bool,
}

impl DirObserver {
    fn write_individual(&self, ind: &Individual, trace: &Trace, eval: &Evaluation) -> Result<(), CliError> {
        let dir = self
            .run_dir
            .join(Path::new(&eval.trace_ref).parent().unwrap_or(Path::new(".")));
        write_file(&dir.join("scenario.json"), &serialize_scenario(&ind.scenario))?;
        write_file(&dir.join("trace.json"), &serialize_trace(trace))?;
        write_file(
            &dir.join("verdicts.json"),
            &canon::to_canonical_string(&eval.verdicts, 2),
        )?;
        let fitness = serde_json::json!({
            "individual_id": eval.individual_id,
            "generation": eval.generation,
            "parent_id": ind.parent_id,
            "termination": eval.termination,
            "fitness": eval.fitness,
            "agent_failure": eval.agent_failure,
        });
        write_file(&dir.join("fitness.json"), &canon::to_canonical_string(&fitness, 1))
    }
}

impl SearchObserver for DirObserver {
    fn on_generation(
        &mut self,
        executed: &[(&Individual, &Trace, &Evaluation)],
        s: &GenerationSummary,
    ) -> Result<(), String> {
        for (ind, trace, eval) in executed {
            self.write_individual(ind, trace, eval).map_err(|e| e.to_string())?;
        }
        let line = format!(
            "gen {}: best {:.3} ({}), best so far {:.3}, {} executed, {} violating",
            s.generation, s.best_fitness, s.best_individual, s.best_so_far, s.executed, s.violations
        );
        if self.echo {
            let _ = writeln!(std::io::stdout(), "{line}");
        }
        writeln!(self.engine_log, "{line}").map_err(|e| e.to_string())?;
        writeln!(
            self.csv,
            "{},{},{},{},{},{}",
            s.generation,
            s.executed,
            canon::format_f64(s.best_fitness),
            canon::format_f64(s.best_so_far),
            s.violations,
            s.best_individual
        )
        .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub report: RunReport,
}

fn open_append(p: &Path) -> Result<File, CliError> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(p)
        .map_err(|e| CliError::io(p, e))
}

/// Run the search described by the config at `config_path` and persist the
/// run directory. With `echo`, per-generation lines go to stdout.
pub fn cmd_run(config_path: &Path, echo: bool) -> Result<RunOutcome, CliError> {
    let cfg = load_run_config(config_path)?;
    let (seed, net, catalog) = load_inputs(&cfg)?;
    let name = cfg.run_name.clone().unwrap_or_else(|| "run".into());
    let run_dir = fresh_dir(&cfg.output_root, &name)?;

    let seed_file = cfg
        .scenario
        .file_name()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("seed.json"));
    let seed_copy = Path::new("seeds").join(&seed_file);
    write_file(&run_dir.join(&seed_copy), &serialize_scenario(&seed))?;
    let mut snapshot = cfg.clone();
    snapshot.scenario = seed_copy;
    let snap_text = toml::to_string(&snapshot).map_err(|e| CliError::Config(e.to_string()))?;
    write_file(&run_dir.join(SNAPSHOT_FILE), &snap_text)?;

    let logs = run_dir.join("logs");
    fs::create_dir_all(&logs).map_err(|e| CliError::io(&logs, e))?;
    let mut pool_cfg = cfg.pool.clone();
    pool_cfg.log_dir.get_or_insert_with(|| logs.clone());
    let factory = DefaultAgentFactory {
        step_timeout: Duration::from_secs_f64(cfg.pool.step_timeout_secs),
    };
    let res = PoolResources::new(net.clone(), catalog.clone(), cfg.sim.clone()).with_factory(Arc::new(factory));
    let mut pool = spawn_pool(&pool_cfg, res).map_err(|e| CliError::Input(e.to_string()))?;

    let csv_path = run_dir.join(GENERATIONS_FILE);
    write_file(
        &csv_path,
        "generation,executed,best_fitness,best_so_far,violations,best_individual\n",
    )?;
    let mut observer = DirObserver {
        run_dir: run_dir.clone(),
        csv: open_append(&csv_path)?,
        engine_log: open_append(&logs.join("engine.log"))?,
        echo,
    };
    let _ = writeln!(
        observer.engine_log,
        "config {} seed {} tester {:?} N={} G={} K={}",
        config_path.display(),
        seed.scenario_id,
        cfg.tester.kind,
        cfg.tester.population_size,
        cfg.tester.generations,
        pool.workers()
    );

    let result = {
        let mut exec = PoolExecutor::new(&pool, cfg.agent.clone());
        run_search(&seed, &cfg.tester, &mut exec, &mut observer, &net, &catalog)
    };
    pool.shutdown();
    match result {
        Ok(report) => {
            write_file(&run_dir.join(REPORT_FILE), &report.to_canonical())?;
            let _ = writeln!(
                observer.engine_log,
                "finished: {} violating individuals",
                report.violating.len()
            );
            Ok(RunOutcome { run_dir, report })
        }
        Err(SearchError::Aborted { message, report }) => {
            write_file(&run_dir.join(REPORT_FILE), &report.to_canonical())?;
            let _ = writeln!(observer.engine_log, "aborted: {message}");
            Err(CliError::Aborted { run_dir, message })
        }
        Err(e) => {
            let _ = writeln!(observer.engine_log, "aborted: {e}");
            Err(CliError::Aborted {
                run_dir,
                message: e.to_string(),
            })
        }
    }
}
