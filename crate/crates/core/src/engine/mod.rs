//! Evolutionary scenario search: mutation, oracles, fitness and selection.

mod mutate;
mod oracles;
mod search;

pub use mutate::{mutate, MutationOp};
pub use oracles::{
    evaluate_trace, fitness_min_distance, oracle_collision, oracle_completion, oracle_stuck, VerdictDetail,
};
pub use search::{
    individual_rng, run_search, select, tournament, BatchExecutor, GenerationSummary, IndividualRecord, NoopObserver,
    RunReport, SearchError, SearchObserver,
};

use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;
use crate::sim::Termination;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TesterKind {
    Random,
    Genetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Collision,
    Stuck,
    Completion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessKind {
    MinDistance,
}

/// Relative weights of the six mutation operators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MutationWeights {
    pub add_npc: f64,
    pub remove_npc: f64,
    pub perturb_route: f64,
    pub perturb_start: f64,
    pub perturb_weather: f64,
    pub perturb_light: f64,
}

impl Default for MutationWeights {
    fn default() -> Self {
        Self {
            add_npc: 3.0,
            remove_npc: 1.0,
            perturb_route: 2.0,
            perturb_start: 2.0,
            perturb_weather: 1.0,
            perturb_light: 1.0,
        }
    }
}

impl MutationWeights {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.add_npc,
            self.remove_npc,
            self.perturb_route,
            self.perturb_start,
            self.perturb_weather,
            self.perturb_light,
        ]
    }

    /// All mass on one operator.
    pub fn only(op: MutationOp) -> Self {
        let mut w = [0.0; 6];
        w[op as usize] = 1.0;
        Self {
            add_npc: w[0],
            remove_npc: w[1],
            perturb_route: w[2],
            perturb_start: w[3],
            perturb_weather: w[4],
            perturb_light: w[5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MutationConfig {
    pub weights: MutationWeights,
    /// Inserted NPC vehicles stop being added beyond this count.
    pub max_npc_vehicles: usize,
    pub npc_route_min: f64,
    pub npc_route_max: f64,
    pub npc_start_max: f64,
    /// Lanes within this distance of an ego waypoint can host a new NPC.
    pub corridor_radius: f64,
    /// NPC target speeds are this fraction range of the lane speed limit.
    pub npc_speed_factor: (f64, f64),
    pub speed_sigma: f64,
    pub reroute_radius: f64,
    pub start_sigma: f64,
    pub weather_sigma: f64,
    pub light_sigma: f64,
    pub max_attempts: usize,
}

impl Default for MutationConfig {
    fn default() -> Self {
        Self {
            weights: MutationWeights::default(),
            max_npc_vehicles: 8,
            npc_route_min: 20.0,
            npc_route_max: 100.0,
            npc_start_max: 20.0,
            corridor_radius: 15.0,
            npc_speed_factor: (0.4, 1.0),
            speed_sigma: 1.0,
            reroute_radius: 15.0,
            start_sigma: 2.0,
            weather_sigma: 10.0,
            light_sigma: 2.0,
            max_attempts: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TesterConfig {
    pub kind: TesterKind,
    pub population_size: usize,
    pub generations: usize,
    pub elite_count: usize,
    pub tournament_size: usize,
    pub rng_seed: u64,
    pub oracles: Vec<OracleKind>,
    pub fitness: FitnessKind,
    pub stop_on_first_violation: bool,
    pub stuck_speed: f64,
    pub stuck_time: f64,
    pub mutation: MutationConfig,
}

impl Default for TesterConfig {
    fn default() -> Self {
        Self {
            kind: TesterKind::Genetic,
            population_size: 8,
            generations: 10,
            elite_count: 2,
            tournament_size: 3,
            rng_seed: 0,
            oracles: vec![OracleKind::Collision, OracleKind::Stuck, OracleKind::Completion],
            fitness: FitnessKind::MinDistance,
            stop_on_first_violation: false,
            stuck_speed: 0.1,
            stuck_time: 30.0,
            mutation: MutationConfig::default(),
        }
    }
}

impl TesterConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.population_size < 1 {
            return Err("tester.population_size must be >= 1".into());
        }
        if self.generations < 1 {
            return Err("tester.generations must be >= 1".into());
        }
        if self.elite_count > self.population_size {
            return Err("tester.elite_count must not exceed population_size".into());
        }
        if self.tournament_size < 2 {
            return Err("tester.tournament_size must be >= 2".into());
        }
        if !(self.stuck_speed > 0.0 && self.stuck_time > 0.0) {
            return Err("tester stuck thresholds must be positive".into());
        }
        let m = &self.mutation;
        let w = m.weights.as_array();
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return Err("tester.mutation.weights must be non-negative with a positive sum".into());
        }
        if !(m.npc_route_min > 0.0 && m.npc_route_min < m.npc_route_max) {
            return Err("tester.mutation needs 0 < npc_route_min < npc_route_max".into());
        }
        let (lo, hi) = m.npc_speed_factor;
        if !(lo > 0.0 && lo <= hi) {
            return Err("tester.mutation.npc_speed_factor must be an increasing positive pair".into());
        }
        if m.max_attempts < 1 {
            return Err("tester.mutation.max_attempts must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub individual_id: String,
    pub scenario: Scenario,
    pub parent_id: Option<String>,
    pub generation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleVerdict {
    pub oracle: OracleKind,
    pub violated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<VerdictDetail>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Evaluation {
    pub individual_id: String,
    pub generation: usize,
    pub termination: Termination,
    pub verdicts: Vec<OracleVerdict>,
    pub fitness: f64,
    /// Set when the run ended in agent_failure; fitness is then the sentinel.
    pub agent_failure: bool,
    /// Path of the stored trace relative to the run directory.
    pub trace_ref: String,
}

impl Evaluation {
    pub fn violated(&self) -> bool {
        self.verdicts.iter().any(|v| v.violated)
    }

    pub fn verdict(&self, kind: OracleKind) -> Option<&OracleVerdict> {
        self.verdicts.iter().find(|v| v.oracle == kind)
    }
}
