use serde::{Deserialize, Serialize};

use super::{Evaluation, OracleKind, OracleVerdict, TesterConfig};
use crate::geometry::{obb_distance, obb_intersects, Vec2};
use crate::sim::COMPLETION_SLACK;
use crate::sim::{ActorState, EgoGoal, SceneObs, Termination, Trace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictDetail {
    pub actors: Vec<String>,
    pub step: u64,
    pub x: f64,
    pub y: f64,
}

fn verdict(oracle: OracleKind, detail: Option<VerdictDetail>) -> OracleVerdict {
    OracleVerdict {
        oracle,
        violated: detail.is_some(),
        detail,
    }
}

/// Violated when some recorded ego footprint intersects another actor's.
pub fn oracle_collision(trace: &Trace) -> OracleVerdict {
    for obs in &trace.observations {
        for ego in &obs.egos {
            for other in obs.collidables().filter(|a| a.id != ego.id) {
                if obb_intersects(ego.pose(), ego.extent, other.pose(), other.extent) {
                    let detail = VerdictDetail {
                        actors: vec![ego.id.clone(), other.id.clone()],
                        step: obs.step,
                        x: ego.x,
                        y: ego.y,
                    };
                    return verdict(OracleKind::Collision, Some(detail));
                }
            }
        }
    }
    verdict(OracleKind::Collision, None)
}

fn route_done(ego: &ActorState, goal: &EgoGoal, goal_radius: f64) -> bool {
    Vec2::new(ego.x, ego.y).dist(Vec2::new(goal.x, goal.y)) <= goal_radius
        && ego.route_progress >= goal.route_length - goal_radius - COMPLETION_SLACK
}

/// Violated when an active ego stays below `v_stuck` for at least `t_stuck`
/// seconds of recorded time before finishing its route. All stuck egos are
/// named; the step is where the last of them crossed the threshold.
pub fn oracle_stuck(trace: &Trace, v_stuck: f64, t_stuck: f64) -> OracleVerdict {
    let goal_radius = trace.header.goal_radius;
    let mut stuck: Vec<(String, u64, f64, f64)> = Vec::new();
    for goal in &trace.header.goals {
        let mut since: Option<f64> = None;
        let mut done = false;
        for obs in &trace.observations {
            let Some(ego) = obs.ego(&goal.id) else { break };
            done = done || route_done(ego, goal, goal_radius);
            if done {
                break;
            }
            if ego.active && ego.speed < v_stuck {
                let start = *since.get_or_insert(obs.timestamp);
                if obs.timestamp - start >= t_stuck - 1e-9 {
                    stuck.push((goal.id.clone(), obs.step, ego.x, ego.y));
                    break;
                }
            } else {
                since = None;
            }
        }
    }
    if stuck.is_empty() {
        return verdict(OracleKind::Stuck, None);
    }
    let last = stuck.iter().max_by_key(|s| s.1).expect("non-empty");
    let detail = VerdictDetail {
        actors: stuck.iter().map(|s| s.0.clone()).collect(),
        step: last.1,
        x: stuck[0].2,
        y: stuck[0].3,
    };
    verdict(OracleKind::Stuck, Some(detail))
}

/// Violated when the run hit the time limit with an ego away from its goal.
pub fn oracle_completion(trace: &Trace) -> OracleVerdict {
    if trace.termination() != Termination::MaxTimeReached {
        return verdict(OracleKind::Completion, None);
    }
    let last = trace.last();
    let radius = trace.header.goal_radius;
    let missing: Vec<&ActorState> = trace
        .header
        .goals
        .iter()
        .filter_map(|g| {
            let e = last.ego(&g.id)?;
            (Vec2::new(e.x, e.y).dist(Vec2::new(g.x, g.y)) > radius).then_some(e)
        })
        .collect();
    if missing.is_empty() {
        return verdict(OracleKind::Completion, None);
    }
    let detail = VerdictDetail {
        actors: missing.iter().map(|e| e.id.clone()).collect(),
        step: last.step,
        x: missing[0].x,
        y: missing[0].y,
    };
    verdict(OracleKind::Completion, Some(detail))
}

fn min_distance_in(obs: &SceneObs, cap: f64) -> f64 {
    let mut best = cap;
    for ego in &obs.egos {
        for other in obs.collidables().filter(|a| a.id != ego.id) {
            let d = obb_distance(ego.pose(), ego.extent, other.pose(), other.extent);
            best = best.min(d);
        }
    }
    best
}

/// Smallest footprint distance between an ego and any other collidable actor
/// over the recorded observations, capped at the sensing radius. The cap is
/// also the value for traces without other actors and for agent failures.
pub fn fitness_min_distance(trace: &Trace) -> f64 {
    let cap = trace.header.sensing_radius;
    if trace.termination() == Termination::AgentFailure {
        return cap;
    }
    trace
        .observations
        .iter()
        .map(|o| min_distance_in(o, cap))
        .fold(cap, f64::min)
}

/// Apply the configured oracles and the fitness function to one trace.
pub fn evaluate_trace(
    trace: &Trace,
    individual_id: &str,
    generation: usize,
    trace_ref: String,
    cfg: &TesterConfig,
) -> Evaluation {
    let mut kinds = cfg.oracles.clone();
    kinds.sort();
    kinds.dedup();
    let verdicts = kinds
        .into_iter()
        .map(|k| match k {
            OracleKind::Collision => oracle_collision(trace),
            OracleKind::Stuck => oracle_stuck(trace, cfg.stuck_speed, cfg.stuck_time),
            OracleKind::Completion => oracle_completion(trace),
        })
        .collect();
    Evaluation {
        individual_id: individual_id.to_string(),
        generation,
        termination: trace.termination(),
        verdicts,
        fitness: fitness_min_distance(trace),
        agent_failure: trace.termination() == Termination::AgentFailure,
        trace_ref,
    }
}
