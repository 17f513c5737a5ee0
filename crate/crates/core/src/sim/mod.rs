//! Deterministic fixed-timestep 2-D traffic simulation.

mod kinematics;
mod lights;
mod runner;
mod trace;
mod world;

pub use kinematics::{kinematic_bicycle_step, KinematicState};
pub use lights::{traffic_light_phase, LightColor, LightPhase};
pub use runner::{failure_trace, run_scenario, RunControl};
pub use trace::{
    parse_trace, serialize_trace, ActorKind, ActorState, EgoGoal, SceneObs, Termination, Trace, TraceError, TraceHeader,
};
pub use world::{
    init_world, npc_vehicle_action, InitError, RouteTrack, WorldState, COMPLETION_SLACK, NPC_SPEED_GAIN,
    NPC_STOP_MARGIN,
};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub max_sim_time: f64,
    pub sensing_radius: f64,
    pub goal_radius: f64,
    pub stop_on_collision: bool,
    pub obs_stride: u64,
    /// Recorded in every trace header; the base for any agent randomness.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            max_sim_time: 120.0,
            sensing_radius: 50.0,
            goal_radius: 2.0,
            stop_on_collision: true,
            obs_stride: 1,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn check(&self) -> Result<(), String> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err("sim.dt must be > 0".into());
        }
        if !(self.max_sim_time.is_finite() && self.max_sim_time >= self.dt) {
            return Err("sim.max_sim_time must be >= dt".into());
        }
        if self.obs_stride < 1 {
            return Err("sim.obs_stride must be >= 1".into());
        }
        if !(self.sensing_radius > 0.0 && self.goal_radius > 0.0) {
            return Err("sim radii must be positive".into());
        }
        Ok(())
    }
}
