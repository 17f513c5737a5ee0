//! Plain Rust layer under the Python bindings. Everything speaks canonical
//! JSON text so values cross the boundary without custom conversions.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use roadfuzz::agents::{AgentBindings, DefaultAgentFactory};
use roadfuzz::cli::{cmd_replay, cmd_report, cmd_run};
use roadfuzz::engine::{evaluate_trace, mutate, TesterConfig};
use roadfuzz::exec::{spawn_pool, PoolResources, WorkerPoolConfig};
use roadfuzz::network::{available_towns, bundled_network, RoadNetwork};
use roadfuzz::scenario::{parse_scenario, serialize_scenario, validate_scenario, Scenario, VehicleModelCatalog};
use roadfuzz::sim::{parse_trace, run_scenario, serialize_trace, RunControl, SimConfig, Trace};

pub type ApiResult<T> = Result<T, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

pub fn towns() -> Vec<String> {
    available_towns().into_iter().map(String::from).collect()
}

pub fn network(town: &str) -> ApiResult<RoadNetwork> {
    bundled_network(town).map_err(err)
}

pub fn map_json(town: &str) -> ApiResult<String> {
    Ok(network(town)?.to_json())
}

pub fn scenario(text: &str) -> ApiResult<Scenario> {
    parse_scenario(text).map_err(err)
}

pub fn trace(text: &str) -> ApiResult<Trace> {
    parse_trace(text).map_err(err)
}

/// `sim_json` may override any SimConfig field; missing keys keep defaults.
pub fn sim_config(sim_json: Option<&str>) -> ApiResult<SimConfig> {
    let cfg: SimConfig = match sim_json {
        Some(t) => serde_json::from_str(t).map_err(err)?,
        None => SimConfig::default(),
    };
    cfg.check()?;
    Ok(cfg)
}

pub fn seed_scenarios(
    town: &str,
    num: usize,
    min_length: f64,
    max_length: f64,
    rng_seed: u64,
) -> ApiResult<Vec<String>> {
    let seeds = network(town)?
        .generate_seed_scenarios(num, min_length, max_length, rng_seed)
        .map_err(err)?;
    Ok(seeds.iter().map(serialize_scenario).collect())
}

/// Findings as (severity, path, message).
pub fn validate(text: &str) -> ApiResult<Vec<(String, String, String)>> {
    let s = scenario(text)?;
    let net = network(&s.map_region.town)?;
    let report = validate_scenario(&s, &net, &VehicleModelCatalog::builtin());
    Ok(report
        .findings
        .iter()
        .map(|f| {
            (
                format!("{:?}", f.severity).to_lowercase(),
                f.path.clone(),
                f.message.clone(),
            )
        })
        .collect())
}

/// Apply `steps` mutations with the default operator weights.
pub fn mutate_scenario(text: &str, rng_seed: u64, steps: usize) -> ApiResult<String> {
    let mut s = scenario(text)?;
    let net = network(&s.map_region.town)?;
    let cat = VehicleModelCatalog::builtin();
    let cfg = TesterConfig::default().mutation;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for _ in 0..steps {
        s = mutate(&s, &cfg, &net, &cat, &mut rng);
    }
    Ok(serialize_scenario(&s))
}

pub fn simulate(text: &str, agent: Option<&str>, sim_json: Option<&str>) -> ApiResult<String> {
    let s = scenario(text)?;
    let net = network(&s.map_region.town)?;
    let bindings = agent.map(AgentBindings::wildcard).unwrap_or_default();
    let t = run_scenario(
        &s,
        &DefaultAgentFactory::default(),
        &bindings,
        &net,
        &VehicleModelCatalog::builtin(),
        &sim_config(sim_json)?,
        &RunControl::default(),
    );
    Ok(serialize_trace(&t))
}

/// Oracle verdicts and fitness with default thresholds, as canonical JSON.
pub fn evaluate(trace_text: &str) -> ApiResult<String> {
    let t = trace(trace_text)?;
    let e = evaluate_trace(&t, t.scenario_id(), 0, String::new(), &TesterConfig::default());
    serde_json::to_string(&e).map_err(err)
}

/// Run scenarios on a pool of `workers`; traces come back in input order.
pub fn execute_batch(
    texts: &[String],
    agent: Option<&str>,
    workers: usize,
    sim_json: Option<&str>,
) -> ApiResult<Vec<String>> {
    let batch: Vec<Scenario> = texts.iter().map(|t| scenario(t)).collect::<ApiResult<_>>()?;
    let Some(first) = batch.first() else {
        return Ok(Vec::new());
    };
    let net = network(&first.map_region.town)?;
    let res = PoolResources::new(net, VehicleModelCatalog::builtin(), sim_config(sim_json)?);
    let pool = spawn_pool(&WorkerPoolConfig::with_workers(workers), res).map_err(err)?;
    let bindings = agent.map(AgentBindings::wildcard).unwrap_or_default();
    let out = pool
        .execute_batch(batch.into_iter().map(|s| (s, bindings.clone())).collect())
        .map_err(err)?;
    Ok(out.iter().map(|r| serialize_trace(&r.trace)).collect())
}

/// Run a search from a config file; returns (run directory, report JSON).
pub fn run_config(path: &str) -> ApiResult<(String, String)> {
    let done = cmd_run(Path::new(path), false).map_err(err)?;
    Ok((done.run_dir.display().to_string(), done.report.to_canonical()))
}

pub fn report(run_dir: &str) -> ApiResult<String> {
    Ok(cmd_report(Path::new(run_dir)).map_err(err)?.text)
}

pub fn replay(trace_path: &str, out_dir: &str, stride: u64) -> ApiResult<Vec<String>> {
    let files = cmd_replay(Path::new(trace_path), Path::new(out_dir), stride).map_err(err)?;
    Ok(files.iter().map(|p| p.display().to_string()).collect())
}
