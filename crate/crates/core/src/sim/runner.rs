use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use super::trace::{EgoGoal, SceneObs, Termination, Trace, TraceHeader};
use super::world::init_world;
use super::SimConfig;
use crate::agents::{Agent, AgentBindings, AgentContext, AgentFactory};
use crate::network::RoadNetwork;
use crate::scenario::{Scenario, VehicleModelCatalog};

/// External limits on a run: a wall-clock deadline and a cancel flag.
#[derive(Debug, Clone, Default)]
pub struct RunControl {
    pub deadline: Option<Instant>,
    pub cancel: Option<Arc<AtomicBool>>,
}

impl RunControl {
    fn interrupted(&self) -> Option<&'static str> {
        if self.cancel.as_ref().is_some_and(|c| c.load(Ordering::Relaxed)) {
            return Some("run cancelled");
        }
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            return Some("wall-clock budget exceeded");
        }
        None
    }
}

fn header(s: &Scenario, cfg: &SimConfig) -> TraceHeader {
    TraceHeader {
        scenario_id: s.scenario_id.clone(),
        town: s.map_region.town.clone(),
        dt: cfg.dt,
        seed: cfg.seed,
        termination: Termination::AgentFailure,
        failure_detail: None,
        budget_exceeded: false,
        weather: s.weather,
        goal_radius: cfg.goal_radius,
        sensing_radius: cfg.sensing_radius,
        goals: s
            .ego_vehicles
            .iter()
            .filter(|e| !e.route.waypoints.is_empty())
            .map(|e| EgoGoal {
                id: e.id.clone(),
                x: e.route.last().x,
                y: e.route.last().y,
                route_length: e.route.length(),
            })
            .collect(),
    }
}

/// Trace for a run that could not produce any scene: a single empty step-0
/// observation and termination `agent_failure`.
pub fn failure_trace(s: &Scenario, cfg: &SimConfig, detail: String, budget_exceeded: bool) -> Trace {
    let mut header = header(s, cfg);
    header.failure_detail = Some(detail);
    header.budget_exceeded = budget_exceeded;
    Trace {
        header,
        observations: vec![SceneObs {
            step: 0,
            timestamp: 0.0,
            egos: vec![],
            other_actors: vec![],
            agent_logs: BTreeMap::new(),
        }],
        wall_clock: 0.0,
    }
}

/// Execute one scenario to termination. Never fails: setup and agent errors
/// end the run with termination `agent_failure` and a detail message.
pub fn run_scenario(
    s: &Scenario,
    factory: &dyn AgentFactory,
    bindings: &AgentBindings,
    net: &RoadNetwork,
    catalog: &VehicleModelCatalog,
    cfg: &SimConfig,
    control: &RunControl,
) -> Trace {
    let started = Instant::now();
    let mut header = header(s, cfg);
    let finish = |mut header: TraceHeader, observations: Vec<SceneObs>, termination, detail: Option<String>| {
        header.termination = termination;
        header.failure_detail = detail;
        Trace {
            header,
            observations,
            wall_clock: started.elapsed().as_secs_f64(),
        }
    };

    let mut world = match init_world(s, net, catalog, cfg) {
        Ok(w) => w,
        Err(e) => {
            let mut t = failure_trace(s, cfg, format!("init: {e}"), false);
            t.wall_clock = started.elapsed().as_secs_f64();
            return t;
        }
    };

    let mut agents: Vec<Box<dyn Agent>> = Vec::with_capacity(s.ego_vehicles.len());
    for (i, ego) in s.ego_vehicles.iter().enumerate() {
        let ctx = AgentContext {
            ego_id: ego.id.clone(),
            route: ego.route.clone(),
            vehicle_limits: *world.ego_model(i),
            weather: s.weather,
            dt: cfg.dt,
            sensing_radius: cfg.sensing_radius,
        };
        match factory.setup_env(bindings.resolve(ego), &ctx) {
            Ok(a) => agents.push(a),
            Err(e) => {
                for a in &mut agents {
                    a.shutdown();
                }
                let obs = vec![world.scene_obs(BTreeMap::new())];
                return finish(
                    header,
                    obs,
                    Termination::AgentFailure,
                    Some(format!("{}: setup: {e}", ego.id)),
                );
            }
        }
    }

    let stride = cfg.obs_stride.max(1);
    let mut observations = vec![world.scene_obs(BTreeMap::new())];
    let mut recorded = 0u64;
    let (termination, detail) = loop {
        if let Some(why) = control.interrupted() {
            header.budget_exceeded = true;
            break (Termination::AgentFailure, Some(why.to_string()));
        }
        let mut actions = vec![None; agents.len()];
        let mut logs = BTreeMap::new();
        let mut failure = None;
        for (i, agent) in agents.iter_mut().enumerate() {
            if !world.ego_active(i) {
                continue;
            }
            let obs = world.observe(i);
            match agent.run_step(&obs) {
                Ok((a, log)) if a.is_finite() => {
                    actions[i] = Some(a);
                    logs.insert(world.ego_id(i).to_string(), log);
                }
                Ok(_) => {
                    failure = Some(format!("{}: non-finite action", world.ego_id(i)));
                    break;
                }
                Err(e) => {
                    failure = Some(format!("{}: {e}", world.ego_id(i)));
                    break;
                }
            }
        }
        if let Some(detail) = failure {
            break (Termination::AgentFailure, Some(detail));
        }
        world.step(&actions);
        let step = world.step_index();
        let collisions = world.ego_collisions();
        let outcome = if cfg.stop_on_collision && !collisions.is_empty() {
            let (a, b) = &collisions[0];
            Some((Termination::Collision, Some(format!("{a} collided with {b}"))))
        } else if world.all_completed() {
            Some((Termination::AllRoutesCompleted, None))
        } else if step as f64 * cfg.dt >= cfg.max_sim_time - 1e-9 {
            Some((Termination::MaxTimeReached, None))
        } else {
            None
        };
        if step % stride == 0 || outcome.is_some() {
            observations.push(world.scene_obs(logs));
            recorded = step;
        }
        if let Some(o) = outcome {
            break o;
        }
    };
    if recorded != world.step_index() {
        observations.push(world.scene_obs(BTreeMap::new()));
    }
    for a in &mut agents {
        a.shutdown();
    }
    finish(header, observations, termination, detail)
}
