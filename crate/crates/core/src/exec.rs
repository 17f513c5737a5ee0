//! Worker pool that runs batches of scenarios concurrently.
//!
//! Each worker thread owns its simulator state for the duration of a job;
//! jobs are pulled from one shared queue, so an idle worker takes the next
//! pending scenario. Results come back index-aligned with the submission.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, Sender};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentBindings, AgentFactory, DefaultAgentFactory};
use crate::engine::BatchExecutor;
use crate::network::RoadNetwork;
use crate::scenario::{Scenario, VehicleModelCatalog};
use crate::sim::{failure_trace, run_scenario, RunControl, SimConfig, Trace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkerPoolConfig {
    /// Number of workers K.
    pub workers: usize,
    /// Wall-clock budget per scenario, seconds.
    pub budget_secs: f64,
    /// How long an external agent may take to answer one step, seconds.
    pub step_timeout_secs: f64,
    /// Per-worker log files go here when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_dir: Option<PathBuf>,
}

impl Default for WorkerPoolConfig {
    fn default() -> Self {
        Self {
            workers: 1,
            budget_secs: 300.0,
            step_timeout_secs: 2.0,
            log_dir: None,
        }
    }
}

impl WorkerPoolConfig {
    pub fn with_workers(workers: usize) -> Self {
        Self {
            workers,
            ..Default::default()
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if self.workers < 1 {
            return Err("pool.workers must be >= 1".into());
        }
        if !(self.budget_secs.is_finite() && self.budget_secs > 0.0) {
            return Err("pool.budget_secs must be > 0".into());
        }
        if !(self.step_timeout_secs.is_finite() && self.step_timeout_secs > 0.0) {
            return Err("pool.step_timeout_secs must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ExecResult {
    pub slot_index: usize,
    pub trace: Trace,
    /// Seconds spent on this scenario by its worker.
    pub wall_clock: f64,
    pub worker_id: usize,
}

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("invalid pool config: {0}")]
    Config(String),
    #[error("cannot start worker {worker}: {source}")]
    Spawn { worker: usize, source: std::io::Error },
    #[error("cannot open worker log: {0}")]
    Log(std::io::Error),
    #[error("pool is shut down")]
    Closed,
    #[error("empty batch")]
    EmptyBatch,
    /// Every worker died; slots that got no result hold failure traces.
    #[error("all workers died; {missing} of {total} results missing")]
    AllWorkersDied {
        missing: usize,
        total: usize,
        partial: Vec<ExecResult>,
    },
}

/// Shared, read-only inputs of every job.
#[derive(Clone)]
pub struct PoolResources {
    pub net: Arc<RoadNetwork>,
    pub catalog: Arc<VehicleModelCatalog>,
    pub sim: SimConfig,
    pub factory: Arc<dyn AgentFactory>,
}

impl PoolResources {
    pub fn new(net: RoadNetwork, catalog: VehicleModelCatalog, sim: SimConfig) -> Self {
        Self {
            net: Arc::new(net),
            catalog: Arc::new(catalog),
            sim,
            factory: Arc::new(DefaultAgentFactory::default()),
        }
    }

    pub fn with_factory(mut self, factory: Arc<dyn AgentFactory>) -> Self {
        self.factory = factory;
        self
    }
}

struct Job {
    slot: usize,
    scenario: Scenario,
    bindings: AgentBindings,
    reply: Sender<ExecResult>,
}

pub struct WorkerPool {
    jobs: Option<Sender<Job>>,
    handles: Vec<JoinHandle<()>>,
    cancel: Arc<AtomicBool>,
    workers: usize,
    sim: SimConfig,
}

fn panic_message(p: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".into()
    }
}

fn worker_loop(
    id: usize,
    jobs: Receiver<Job>,
    res: PoolResources,
    budget: Duration,
    cancel: Arc<AtomicBool>,
    mut log: Option<File>,
) {
    for job in jobs {
        let started = Instant::now();
        let trace = if cancel.load(Ordering::Relaxed) {
            failure_trace(&job.scenario, &res.sim, "run cancelled".into(), true)
        } else {
            let control = RunControl {
                deadline: Some(started + budget),
                cancel: Some(cancel.clone()),
            };
            let run = catch_unwind(AssertUnwindSafe(|| {
                run_scenario(
                    &job.scenario,
                    res.factory.as_ref(),
                    &job.bindings,
                    &res.net,
                    &res.catalog,
                    &res.sim,
                    &control,
                )
            }));
            match run {
                Ok(t) => t,
                Err(p) => failure_trace(
                    &job.scenario,
                    &res.sim,
                    format!("worker panic: {}", panic_message(&*p)),
                    false,
                ),
            }
        };
        let wall_clock = started.elapsed().as_secs_f64();
        if let Some(f) = log.as_mut() {
            let _ = writeln!(
                f,
                "slot={} scenario={} termination={} steps={} wall={:.3}s{}",
                job.slot,
                job.scenario.scenario_id,
                trace.termination().as_str(),
                trace.last().step,
                wall_clock,
                trace
                    .header
                    .failure_detail
                    .as_deref()
                    .map(|d| format!(" detail={d:?}"))
                    .unwrap_or_default(),
            );
        }
        let _ = job.reply.send(ExecResult {
            slot_index: job.slot,
            trace,
            wall_clock,
            worker_id: id,
        });
    }
}

/// Start K workers sharing `res`.
pub fn spawn_pool(cfg: &WorkerPoolConfig, res: PoolResources) -> Result<WorkerPool, PoolError> {
    cfg.check().map_err(PoolError::Config)?;
    res.sim.check().map_err(PoolError::Config)?;
    if let Some(dir) = &cfg.log_dir {
        fs::create_dir_all(dir).map_err(PoolError::Log)?;
    }
    let (tx, rx) = unbounded::<Job>();
    let cancel = Arc::new(AtomicBool::new(false));
    let budget = Duration::from_secs_f64(cfg.budget_secs);
    let mut pool = WorkerPool {
        jobs: Some(tx),
        handles: Vec::with_capacity(cfg.workers),
        cancel: cancel.clone(),
        workers: cfg.workers,
        sim: res.sim.clone(),
    };
    for id in 0..cfg.workers {
        let log = match &cfg.log_dir {
            Some(dir) => Some(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(dir.join(format!("worker_{id}.log")))
                    .map_err(PoolError::Log)?,
            ),
            None => None,
        };
        let (rx, res, cancel) = (rx.clone(), res.clone(), cancel.clone());
        let handle = std::thread::Builder::new()
            .name(format!("worker-{id}"))
            .spawn(move || worker_loop(id, rx, res, budget, cancel, log))
            .map_err(|source| PoolError::Spawn { worker: id, source })?;
        pool.handles.push(handle);
    }
    Ok(pool)
}

impl WorkerPool {
    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn is_live(&self) -> bool {
        self.jobs.is_some()
    }

    /// Flag that, once set, ends in-flight runs as budget-exceeded and makes
    /// queued ones fail immediately. Safe to set from any thread.
    pub fn cancel_handle(&self) -> Arc<AtomicBool> {
        self.cancel.clone()
    }

    /// Run every scenario with its bindings; result `i` belongs to input `i`.
    pub fn execute_batch(&self, batch: Vec<(Scenario, AgentBindings)>) -> Result<Vec<ExecResult>, PoolError> {
        let jobs = self.jobs.as_ref().ok_or(PoolError::Closed)?;
        if batch.is_empty() {
            return Err(PoolError::EmptyBatch);
        }
        let total = batch.len();
        let (reply, results) = unbounded();
        let mut placeholders = Vec::with_capacity(total);
        for (slot, (scenario, bindings)) in batch.into_iter().enumerate() {
            placeholders.push(scenario.clone());
            let job = Job {
                slot,
                scenario,
                bindings,
                reply: reply.clone(),
            };
            if jobs.send(job).is_err() {
                break;
            }
        }
        drop(reply);
        let mut out: Vec<Option<ExecResult>> = (0..total).map(|_| None).collect();
        for r in results.iter() {
            let slot = r.slot_index;
            out[slot] = Some(r);
        }
        let missing = out.iter().filter(|r| r.is_none()).count();
        let filled: Vec<ExecResult> = out
            .into_iter()
            .enumerate()
            .map(|(slot, r)| {
                r.unwrap_or_else(|| ExecResult {
                    slot_index: slot,
                    trace: failure_trace(&placeholders[slot], &self.sim, "worker died".into(), false),
                    wall_clock: 0.0,
                    worker_id: usize::MAX,
                })
            })
            .collect();
        if missing == 0 {
            Ok(filled)
        } else {
            Err(PoolError::AllWorkersDied {
                missing,
                total,
                partial: filled,
            })
        }
    }

    /// Cancel in-flight work, close the queue and join the workers. Running
    /// scenarios end as budget-exceeded; their agents are shut down by the
    /// simulator. Calling it again does nothing.
    pub fn shutdown(&mut self) {
        if self.jobs.is_none() {
            return;
        }
        self.cancel.store(true, Ordering::Relaxed);
        self.jobs = None;
        for h in self.handles.drain(..) {
            if h.join().is_err() {
                eprintln!("warning: a worker thread ended abnormally");
            }
        }
    }
}

impl Drop for WorkerPool {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Adapter that lets the search engine drive a pool with fixed bindings.
pub struct PoolExecutor<'a> {
    pub pool: &'a WorkerPool,
    pub bindings: AgentBindings,
    /// Results of the latest batch, kept for wall-clock and worker stats.
    pub last: Vec<(f64, usize)>,
}

impl<'a> PoolExecutor<'a> {
    pub fn new(pool: &'a WorkerPool, bindings: AgentBindings) -> Self {
        Self {
            pool,
            bindings,
            last: Vec::new(),
        }
    }
}

impl BatchExecutor for PoolExecutor<'_> {
    fn execute(&mut self, scenarios: &[Scenario]) -> Result<Vec<Trace>, String> {
        if scenarios.is_empty() {
            return Ok(Vec::new());
        }
        let batch = scenarios.iter().map(|s| (s.clone(), self.bindings.clone())).collect();
        let results = self.pool.execute_batch(batch).map_err(|e| e.to_string())?;
        self.last = results.iter().map(|r| (r.wall_clock, r.worker_id)).collect();
        // Evaluate exactly what gets stored.
        Ok(results.into_iter().map(|r| r.trace.normalized()).collect())
    }
}
