mod common;

use std::collections::BTreeSet;
use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::time::Duration;

use roadfuzz::agents::{
    Agent, AgentAction, AgentBindings, AgentContext, AgentError, AgentFactory, AgentLog, DefaultAgentFactory,
    Observation,
};
use roadfuzz::exec::{spawn_pool, PoolError, PoolResources, WorkerPoolConfig};
use roadfuzz::network::demo_network;
use roadfuzz::scenario::{Scenario, VehicleModelCatalog};
use roadfuzz::sim::{serialize_trace, SimConfig, Termination};

fn sim(max: f64) -> SimConfig {
    SimConfig {
        max_sim_time: max,
        ..Default::default()
    }
}

fn res(max: f64) -> PoolResources {
    PoolResources::new(demo_network(), VehicleModelCatalog::builtin(), sim(max))
}

fn seeds(n: usize) -> Vec<Scenario> {
    demo_network().generate_seed_scenarios(n, 60.0, 150.0, 21).unwrap()
}

fn jobs(s: &[Scenario], agent: &str) -> Vec<(Scenario, AgentBindings)> {
    s.iter().map(|s| (s.clone(), AgentBindings::wildcard(agent))).collect()
}

#[test]
fn four_scenarios_two_workers() {
    let s = seeds(4);
    let pool = spawn_pool(&WorkerPoolConfig::with_workers(2), res(20.0)).unwrap();
    assert_eq!(pool.workers(), 2);
    let out = pool.execute_batch(jobs(&s, "builtin:safe_follower")).unwrap();
    assert_eq!(out.len(), 4);
    for (i, r) in out.iter().enumerate() {
        assert_eq!(r.slot_index, i);
        assert_eq!(r.trace.scenario_id(), s[i].scenario_id);
        assert!(r.worker_id < 2);
        assert!(r.wall_clock >= 0.0);
    }
}

#[test]
fn one_scenario_eight_workers() {
    let s = seeds(1);
    let pool = spawn_pool(&WorkerPoolConfig::with_workers(8), res(20.0)).unwrap();
    let out = pool.execute_batch(jobs(&s, "builtin:naive_follower")).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].slot_index, 0);
    assert!(out[0].worker_id < 8);
}

#[test]
fn sequential_equivalence_across_worker_counts() {
    let mut batch = seeds(5);
    batch.push(common::fixture("two_ego_crossing"));
    batch.push(common::fixture("deadlock_3ego"));
    let traces = |k| {
        let pool = spawn_pool(&WorkerPoolConfig::with_workers(k), res(30.0)).unwrap();
        pool.execute_batch(jobs(&batch, "builtin:safe_follower"))
            .unwrap()
            .iter()
            .map(|r| serialize_trace(&r.trace))
            .collect::<Vec<_>>()
    };
    let one = traces(1);
    assert_eq!(one, traces(3));
    assert_eq!(one, traces(4));
}

#[test]
fn rejects_bad_config_and_empty_batch() {
    assert!(matches!(
        spawn_pool(&WorkerPoolConfig::with_workers(0), res(10.0)),
        Err(PoolError::Config(_))
    ));
    let pool = spawn_pool(&WorkerPoolConfig::with_workers(1), res(10.0)).unwrap();
    assert!(matches!(pool.execute_batch(Vec::new()), Err(PoolError::EmptyBatch)));
}

struct Boom;

impl Agent for Boom {
    fn run_step(&mut self, obs: &Observation) -> Result<(AgentAction, AgentLog), AgentError> {
        if obs.step >= 3 {
            panic!("injected fault");
        }
        Ok((AgentAction { accel: 0.0, steer: 0.0 }, AgentLog::new()))
    }
}

/// Hands out `Boom` for the reference "test:boom", defers otherwise.
struct WithBoom(DefaultAgentFactory);

impl AgentFactory for WithBoom {
    fn setup_env(&self, agent_ref: &str, ctx: &AgentContext) -> Result<Box<dyn Agent>, AgentError> {
        if agent_ref == "test:boom" {
            Ok(Box::new(Boom))
        } else {
            self.0.setup_env(agent_ref, ctx)
        }
    }
}

#[test]
fn panicking_slot_leaves_others_unchanged() {
    let s = seeds(4);
    let make = || {
        let r = res(25.0).with_factory(Arc::new(WithBoom(DefaultAgentFactory::default())));
        spawn_pool(&WorkerPoolConfig::with_workers(2), r).unwrap()
    };
    let mut with_fault = jobs(&s, "builtin:safe_follower");
    with_fault[2].1 = AgentBindings::wildcard("test:boom");
    let faulty = make().execute_batch(with_fault).unwrap();

    let mut without = jobs(&s, "builtin:safe_follower");
    without.remove(2);
    let clean = make().execute_batch(without).unwrap();

    let hit = &faulty[2].trace;
    assert_eq!(hit.termination(), Termination::AgentFailure);
    assert!(!hit.header.budget_exceeded);
    assert!(hit
        .header
        .failure_detail
        .as_deref()
        .unwrap_or("")
        .contains("injected fault"));
    let survivors: Vec<String> = faulty
        .iter()
        .filter(|r| r.slot_index != 2)
        .map(|r| serialize_trace(&r.trace))
        .collect();
    let reference: Vec<String> = clean.iter().map(|r| serialize_trace(&r.trace)).collect();
    assert_eq!(survivors, reference);
}

#[test]
fn over_budget_scenario_is_flagged() {
    let cfg = WorkerPoolConfig {
        budget_secs: 1e-4,
        ..WorkerPoolConfig::with_workers(2)
    };
    let pool = spawn_pool(&cfg, res(60.0)).unwrap();
    let out = pool.execute_batch(jobs(&seeds(3), "builtin:safe_follower")).unwrap();
    assert_eq!(out.len(), 3);
    for r in &out {
        assert_eq!(r.trace.termination(), Termination::AgentFailure);
        assert!(r.trace.header.budget_exceeded);
    }
}

#[test]
fn cancel_mid_batch_reports_budget_exceeded() {
    let batch: Vec<Scenario> = (0..6).map(|_| common::fixture("deadlock_3ego")).collect();
    let pool = spawn_pool(&WorkerPoolConfig::with_workers(2), res(600.0)).unwrap();
    let cancel = pool.cancel_handle();
    let trigger = std::thread::spawn(move || {
        std::thread::sleep(Duration::from_millis(100));
        cancel.store(true, Ordering::SeqCst);
    });
    let out = pool.execute_batch(jobs(&batch, "builtin:yielding_agent")).unwrap();
    trigger.join().unwrap();
    assert_eq!(out.len(), 6);
    let slots: BTreeSet<usize> = out.iter().map(|r| r.slot_index).collect();
    assert_eq!(slots, (0..6).collect());
    // 600 s of simulated deadlock cannot finish in 100 ms, so every slot was
    // cut short, either while running or before it started.
    for r in &out {
        assert_eq!(r.trace.termination(), Termination::AgentFailure);
        assert!(r.trace.header.budget_exceeded, "slot {} not flagged", r.slot_index);
    }
}

#[test]
fn shutdown_is_idempotent_and_closes_pool() {
    let mut pool = spawn_pool(&WorkerPoolConfig::with_workers(3), res(10.0)).unwrap();
    assert!(pool.is_live());
    pool.shutdown();
    assert!(!pool.is_live());
    pool.shutdown();
    assert!(matches!(
        pool.execute_batch(jobs(&seeds(1), "builtin:naive_follower")),
        Err(PoolError::Closed)
    ));
}

#[test]
fn worker_logs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = WorkerPoolConfig {
        log_dir: Some(dir.path().to_path_buf()),
        ..WorkerPoolConfig::with_workers(2)
    };
    let mut pool = spawn_pool(&cfg, res(10.0)).unwrap();
    pool.execute_batch(jobs(&seeds(4), "builtin:naive_follower")).unwrap();
    pool.shutdown();
    let mut lines = 0;
    for id in 0..2 {
        let path = dir.path().join(format!("worker_{id}.log"));
        lines += std::fs::read_to_string(&path)
            .unwrap()
            .lines()
            .filter(|l| !l.trim().is_empty())
            .count();
    }
    assert!(lines >= 4, "{lines} log lines for 4 jobs");
}
