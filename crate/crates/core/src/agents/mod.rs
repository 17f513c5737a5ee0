//! Driving agents behind a two-call interface: `setup_env` builds a stateful
//! handle for one ego, `run_step` maps an observation to a control action
//! plus a log record.
//!
//! Agent references are strings:
//!
//! * `builtin:<kind>[?key=value&...]` with kind `naive_follower`,
//!   `safe_follower` or `yielding_agent`;
//! * `external:<program> [args...]`, a process speaking the line protocol in
//!   [`protocol`].

mod builtin;
pub mod control;
mod external;
pub mod protocol;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builtin::{BuiltinAgent, BuiltinKind, BuiltinParams};
pub use external::{serve_stdio, ExternalAgent, StubMode};

use crate::scenario::{EgoSpec, ModelSpec, Route, WeatherSpec};
use crate::sim::{ActorState, LightColor};

/// Opaque per-step key/value record kept in the trace.
pub type AgentLog = BTreeMap<String, serde_json::Value>;

pub const DEFAULT_STEP_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("unknown agent kind {0:?}")]
    UnknownKind(String),
    #[error("bad agent configuration: {0}")]
    BadConfig(String),
    #[error("external agent handshake failed: {0}")]
    Handshake(String),
    #[error("external agent timed out at step {step}")]
    Timeout { step: u64 },
    #[error("agent protocol violation: {0}")]
    Protocol(String),
    #[error("agent error: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentContext {
    pub ego_id: String,
    pub route: Route,
    pub vehicle_limits: ModelSpec,
    pub weather: WeatherSpec,
    pub dt: f64,
    pub sensing_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisibleLight {
    pub junction_id: String,
    /// Phase of the signal group governing this ego's approach.
    pub phase: LightColor,
    /// Arc distance from the ego reference point to the stop line.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JunctionAhead {
    pub junction_id: String,
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    /// Arc distance to the junction boundary; zero or negative once inside.
    pub distance_to_entry: f64,
}

/// Ground-truth view handed to an agent each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observation {
    pub step: u64,
    pub timestamp: f64,
    pub self_state: ActorState,
    /// Actors within the sensing radius, nearest first (ties by id).
    pub nearby_actors: Vec<ActorState>,
    pub visible_light: Option<VisibleLight>,
    pub junction_ahead: Option<JunctionAhead>,
    /// Route from the ego's current route position onward.
    pub remaining_route: Route,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentAction {
    pub accel: f64,
    pub steer: f64,
}

impl AgentAction {
    pub fn is_finite(&self) -> bool {
        self.accel.is_finite() && self.steer.is_finite()
    }

    /// Clamp into the actuation limits of `limits`.
    pub fn clamped(&self, limits: &ModelSpec) -> Self {
        Self {
            accel: self.accel.clamp(-limits.max_decel, limits.max_accel),
            steer: self.steer.clamp(-limits.max_steer, limits.max_steer),
        }
    }
}

pub trait Agent: Send {
    fn run_step(&mut self, obs: &Observation) -> Result<(AgentAction, AgentLog), AgentError>;

    /// Release external resources. Called once at the end of a run.
    fn shutdown(&mut self) {}
}

/// Resolves agent references into handles.
pub trait AgentFactory: Send + Sync {
    fn setup_env(&self, agent_ref: &str, ctx: &AgentContext) -> Result<Box<dyn Agent>, AgentError>;
}

/// Parsed agent reference.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentRef {
    Builtin(BuiltinKind, BuiltinParams),
    External(Vec<String>),
}

impl AgentRef {
    pub fn parse(text: &str) -> Result<Self, AgentError> {
        if let Some(rest) = text.strip_prefix("builtin:") {
            let (kind, query) = rest.split_once('?').unwrap_or((rest, ""));
            let kind = BuiltinKind::from_name(kind).ok_or_else(|| AgentError::UnknownKind(kind.to_string()))?;
            let params = BuiltinParams::parse(kind, query)?;
            Ok(AgentRef::Builtin(kind, params))
        } else if let Some(cmd) = text.strip_prefix("external:") {
            let argv: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if argv.is_empty() {
                return Err(AgentError::BadConfig("external agent needs a command".into()));
            }
            Ok(AgentRef::External(argv))
        } else {
            Err(AgentError::UnknownKind(text.to_string()))
        }
    }
}

/// Factory for built-in and external agents.
#[derive(Debug, Clone)]
pub struct DefaultAgentFactory {
    pub step_timeout: Duration,
}

impl Default for DefaultAgentFactory {
    fn default() -> Self {
        Self {
            step_timeout: DEFAULT_STEP_TIMEOUT,
        }
    }
}

impl AgentFactory for DefaultAgentFactory {
    fn setup_env(&self, agent_ref: &str, ctx: &AgentContext) -> Result<Box<dyn Agent>, AgentError> {
        match AgentRef::parse(agent_ref)? {
            AgentRef::Builtin(kind, params) => Ok(Box::new(BuiltinAgent::new(kind, params, ctx.clone()))),
            AgentRef::External(argv) => Ok(Box::new(ExternalAgent::spawn(&argv, ctx, self.step_timeout)?)),
        }
    }
}

/// Build an agent handle with the default factory.
pub fn setup_env(agent_ref: &str, ctx: &AgentContext) -> Result<Box<dyn Agent>, AgentError> {
    DefaultAgentFactory::default().setup_env(agent_ref, ctx)
}

/// Which agent drives which ego. Explicit ego ids win over `"*"`, which wins
/// over the reference stored in the scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentBindings {
    pub map: BTreeMap<String, String>,
}

impl AgentBindings {
    pub fn wildcard(agent_ref: impl Into<String>) -> Self {
        Self {
            map: BTreeMap::from([("*".to_string(), agent_ref.into())]),
        }
    }

    pub fn resolve<'a>(&'a self, ego: &'a EgoSpec) -> &'a str {
        self.map
            .get(&ego.id)
            .or_else(|| self.map.get("*"))
            .map(String::as_str)
            .unwrap_or(&ego.agent_config_ref)
    }
}
