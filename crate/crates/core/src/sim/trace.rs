//! Per-step observation records and the trace document.
//!
//! A trace file is `{"header": {...}, "observations": [...]}`. Each
//! observation carries the keys `step`, `timestamp`, `egos`, `other_actors`
//! and `agent_logs`. Floats use the canonical six-digit form; wall-clock time
//! is kept in memory only so that repeated runs produce identical files.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lights::LightColor;
use crate::agents::AgentLog;
use crate::canon;
use crate::geometry::{Extent, Pose};
use crate::scenario::WeatherSpec;

const TRACE_PRETTY_DEPTH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorKind {
    Ego,
    NpcVehicle,
    Walker,
    Obstacle,
    TrafficLight,
}

impl ActorKind {
    pub fn is_vehicle(self) -> bool {
        matches!(self, ActorKind::Ego | ActorKind::NpcVehicle)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorState {
    pub id: String,
    pub kind: ActorKind,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub extent: Extent,
    pub active: bool,
    pub route_progress: f64,
    /// Signal state; present only for traffic-light entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<LightColor>,
}

impl ActorState {
    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.heading)
    }

    pub fn collidable(&self) -> bool {
        self.kind != ActorKind::TrafficLight
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObs {
    pub step: u64,
    pub timestamp: f64,
    pub egos: Vec<ActorState>,
    pub other_actors: Vec<ActorState>,
    pub agent_logs: BTreeMap<String, AgentLog>,
}

impl SceneObs {
    pub fn ego(&self, id: &str) -> Option<&ActorState> {
        self.egos.iter().find(|e| e.id == id)
    }

    pub fn collidables(&self) -> impl Iterator<Item = &ActorState> {
        self.egos
            .iter()
            .chain(self.other_actors.iter())
            .filter(|a| a.collidable())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    AllRoutesCompleted,
    Collision,
    MaxTimeReached,
    AgentFailure,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::AllRoutesCompleted => "all_routes_completed",
            Termination::Collision => "collision",
            Termination::MaxTimeReached => "max_time_reached",
            Termination::AgentFailure => "agent_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoGoal {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub route_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub scenario_id: String,
    pub town: String,
    pub dt: f64,
    pub seed: u64,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_detail: Option<String>,
    pub budget_exceeded: bool,
    pub weather: WeatherSpec,
    pub goal_radius: f64,
    pub sensing_radius: f64,
    pub goals: Vec<EgoGoal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trace {
    pub header: TraceHeader,
    pub observations: Vec<SceneObs>,
    #[serde(skip)]
    pub wall_clock: f64,
}

impl Trace {
    pub fn scenario_id(&self) -> &str {
        &self.header.scenario_id
    }

    pub fn termination(&self) -> Termination {
        self.header.termination
    }

    pub fn dt(&self) -> f64 {
        self.header.dt
    }

    pub fn last(&self) -> &SceneObs {
        self.observations.last().expect("trace has observations")
    }

    pub fn goal(&self, ego_id: &str) -> Option<&EgoGoal> {
        self.header.goals.iter().find(|g| g.id == ego_id)
    }

    /// Copy with floats rounded to the canonical precision.
    pub fn normalized(&self) -> Self {
        let mut t = parse_trace(&serialize_trace(self)).expect("serialized trace re-parses");
        t.wall_clock = self.wall_clock;
        t
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace parse error at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid trace: {0}")]
    Invalid(String),
}

pub fn serialize_trace(trace: &Trace) -> String {
    canon::to_canonical_string(trace, TRACE_PRETTY_DEPTH)
}

pub fn parse_trace(text: &str) -> Result<Trace, TraceError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let trace: Trace = serde_path_to_error::deserialize(de).map_err(|e| TraceError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    if trace.observations.is_empty() {
        return Err(TraceError::Invalid("trace has no observations".into()));
    }
    for w in trace.observations.windows(2) {
        if w[1].step <= w[0].step {
            return Err(TraceError::Invalid(format!(
                "observation steps not increasing at step {}",
                w[1].step
            )));
        }
    }
    Ok(trace)
}
