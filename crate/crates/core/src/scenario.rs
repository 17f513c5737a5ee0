//! Scenario documents: data model, parsing, canonical serialization and
//! validation against a road network.
//!
//! A scenario document is a JSON object with the keys `scenario_id`,
//! `ego_vehicles`, `npc_vehicles`, `npc_walkers`, `npc_obstacles`,
//! `map_region`, `weather` and `traffic_lights`. Unknown keys are rejected at
//! every level. Routes are arrays of `{"x", "y", "target_speed"}` waypoints.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon;
use crate::geometry::{self, Extent, Pose, Vec2};
use crate::network::RoadNetwork;

/// Minimum separation between consecutive waypoints.
pub const MIN_WAYPOINT_GAP: f64 = 0.01;
/// Obstacles must sit within this lateral distance of some lane.
pub const OBSTACLE_LANE_TOLERANCE: f64 = 5.0;

const DOC_PRETTY_DEPTH: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
}

impl ScenarioError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub target_speed: f64,
}

impl Waypoint {
    pub fn new(x: f64, y: f64, target_speed: f64) -> Self {
        Self { x, y, target_speed }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Route {
    pub waypoints: Vec<Waypoint>,
}

impl Route {
    pub fn from_points(points: &[(f64, f64)], target_speed: f64) -> Self {
        Self {
            waypoints: points.iter().map(|&(x, y)| Waypoint::new(x, y, target_speed)).collect(),
        }
    }

    pub fn points(&self) -> Vec<Vec2> {
        self.waypoints.iter().map(Waypoint::position).collect()
    }

    /// Sum of Euclidean segment lengths.
    pub fn length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| w[0].position().dist(w[1].position()))
            .sum()
    }

    pub fn first(&self) -> &Waypoint {
        &self.waypoints[0]
    }

    pub fn last(&self) -> &Waypoint {
        self.waypoints.last().expect("route has waypoints")
    }

    /// Heading of the first segment.
    pub fn start_heading(&self) -> f64 {
        let d = self.waypoints[1].position() - self.waypoints[0].position();
        d.y.atan2(d.x)
    }

    pub fn start_pose(&self) -> Pose {
        let w = self.first();
        Pose::new(w.x, w.y, self.start_heading())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoSpec {
    pub id: String,
    pub model: String,
    pub route: Route,
    pub start_time: f64,
    #[serde(rename = "config_path")]
    pub agent_config_ref: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NpcVehicleSpec {
    pub id: String,
    pub model: String,
    pub route: Route,
    pub start_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NpcWalkerSpec {
    pub id: String,
    pub model: String,
    pub route: Route,
    pub start_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Location {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Location {
    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.heading)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NpcObstacleSpec {
    pub id: String,
    pub model: String,
    pub location: Location,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionBounds {
    pub min_x: f64,
    pub max_x: f64,
    pub min_y: f64,
    pub max_y: f64,
}

impl RegionBounds {
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapRegionSpec {
    pub town: String,
    /// `None` means the whole map.
    #[serde(rename = "region_segment")]
    pub region: Option<RegionBounds>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeatherSpec {
    pub cloudiness: f64,
    pub precipitation: f64,
    pub wind_intensity: f64,
    pub fog_density: f64,
    pub sun_altitude: f64,
}

impl Default for WeatherSpec {
    fn default() -> Self {
        Self {
            cloudiness: 10.0,
            precipitation: 0.0,
            wind_intensity: 5.0,
            fog_density: 0.0,
            sun_altitude: 45.0,
        }
    }
}

impl WeatherSpec {
    pub const PERCENT_RANGE: (f64, f64) = (0.0, 100.0);
    pub const SUN_RANGE: (f64, f64) = (-90.0, 90.0);

    /// (name, value, allowed range) for every field.
    pub fn fields(&self) -> [(&'static str, f64, (f64, f64)); 5] {
        [
            ("cloudiness", self.cloudiness, Self::PERCENT_RANGE),
            ("precipitation", self.precipitation, Self::PERCENT_RANGE),
            ("wind_intensity", self.wind_intensity, Self::PERCENT_RANGE),
            ("fog_density", self.fog_density, Self::PERCENT_RANGE),
            ("sun_altitude", self.sun_altitude, Self::SUN_RANGE),
        ]
    }

    pub fn field_mut(&mut self, index: usize) -> &mut f64 {
        match index {
            0 => &mut self.cloudiness,
            1 => &mut self.precipitation,
            2 => &mut self.wind_intensity,
            3 => &mut self.fog_density,
            _ => &mut self.sun_altitude,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficLightSpec {
    pub green_time: f64,
    pub yellow_time: f64,
    pub red_time: f64,
}

impl Default for TrafficLightSpec {
    fn default() -> Self {
        Self {
            green_time: 10.0,
            yellow_time: 3.0,
            red_time: 7.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub scenario_id: String,
    pub ego_vehicles: Vec<EgoSpec>,
    pub npc_vehicles: Vec<NpcVehicleSpec>,
    pub npc_walkers: Vec<NpcWalkerSpec>,
    pub npc_obstacles: Vec<NpcObstacleSpec>,
    pub map_region: MapRegionSpec,
    pub weather: WeatherSpec,
    pub traffic_lights: TrafficLightSpec,
}

pub const DEFAULT_EGO_MODEL: &str = "vehicle.sedan";
pub const DEFAULT_AGENT: &str = "builtin:safe_follower";

impl Scenario {
    /// Seed scenario: a single ego on `route`, no NPCs, whole map, defaults.
    pub fn seed(scenario_id: impl Into<String>, town: &str, route: Route) -> Self {
        Self {
            scenario_id: scenario_id.into(),
            ego_vehicles: vec![EgoSpec {
                id: "ego_0".into(),
                model: DEFAULT_EGO_MODEL.into(),
                route,
                start_time: 0.0,
                agent_config_ref: DEFAULT_AGENT.into(),
            }],
            npc_vehicles: Vec::new(),
            npc_walkers: Vec::new(),
            npc_obstacles: Vec::new(),
            map_region: MapRegionSpec {
                town: town.to_string(),
                region: None,
            },
            weather: WeatherSpec::default(),
            traffic_lights: TrafficLightSpec::default(),
        }
    }

    /// All actor ids in document order.
    pub fn actor_ids(&self) -> impl Iterator<Item = &str> {
        self.ego_vehicles
            .iter()
            .map(|e| e.id.as_str())
            .chain(self.npc_vehicles.iter().map(|n| n.id.as_str()))
            .chain(self.npc_walkers.iter().map(|n| n.id.as_str()))
            .chain(self.npc_obstacles.iter().map(|n| n.id.as_str()))
    }

    pub fn npc_count(&self) -> usize {
        self.npc_vehicles.len() + self.npc_walkers.len() + self.npc_obstacles.len()
    }

    /// The value after one serialize/parse pass.
    pub fn normalized(&self) -> Self {
        parse_scenario(&serialize_scenario(self)).expect("serialized scenario re-parses")
    }
}

/// Parse and check a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        match inner.classify() {
            serde_json::error::Category::Syntax
            | serde_json::error::Category::Eof
            | serde_json::error::Category::Io => ScenarioError::Syntax {
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            },
            serde_json::error::Category::Data => ScenarioError::schema(path, inner.to_string()),
        }
    })?;
    check_scenario(&scenario)?;
    Ok(scenario)
}

/// Canonical document text.
pub fn serialize_scenario(s: &Scenario) -> String {
    canon::to_canonical_string(s, DOC_PRETTY_DEPTH)
}

fn check_route(path: &str, route: &Route) -> Result<(), ScenarioError> {
    if route.waypoints.len() < 2 {
        return Err(ScenarioError::schema(path, "route needs at least two waypoints"));
    }
    for (i, w) in route.waypoints.iter().enumerate() {
        if !(w.x.is_finite() && w.y.is_finite()) {
            return Err(ScenarioError::schema(
                format!("{path}[{i}]"),
                "waypoint coordinates must be finite",
            ));
        }
        if !(w.target_speed.is_finite() && w.target_speed >= 0.0) {
            return Err(ScenarioError::schema(
                format!("{path}[{i}].target_speed"),
                "target_speed must be finite and >= 0",
            ));
        }
    }
    for (i, w) in route.waypoints.windows(2).enumerate() {
        if w[0].position().dist(w[1].position()) <= MIN_WAYPOINT_GAP {
            return Err(ScenarioError::schema(
                format!("{path}[{}]", i + 1),
                "consecutive waypoints must be more than 0.01 m apart",
            ));
        }
    }
    Ok(())
}

fn check_start_time(path: String, t: f64) -> Result<(), ScenarioError> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(ScenarioError::schema(path, "start_time must be finite and >= 0"))
    }
}

/// Field-level invariants that hold independently of any map.
pub fn check_scenario(s: &Scenario) -> Result<(), ScenarioError> {
    if s.ego_vehicles.is_empty() {
        return Err(ScenarioError::schema(
            "ego_vehicles",
            "at least one ego vehicle is required",
        ));
    }
    let mut seen = BTreeSet::new();
    let mut check_id = |path: String, id: &str| {
        if id.is_empty() {
            return Err(ScenarioError::schema(path, "actor id must be non-empty"));
        }
        if !seen.insert(id.to_string()) {
            return Err(ScenarioError::schema(path, format!("duplicate actor id {id:?}")));
        }
        Ok(())
    };
    for (i, e) in s.ego_vehicles.iter().enumerate() {
        check_id(format!("ego_vehicles[{i}].id"), &e.id)?;
    }
    for (i, n) in s.npc_vehicles.iter().enumerate() {
        check_id(format!("npc_vehicles[{i}].id"), &n.id)?;
    }
    for (i, n) in s.npc_walkers.iter().enumerate() {
        check_id(format!("npc_walkers[{i}].id"), &n.id)?;
    }
    for (i, n) in s.npc_obstacles.iter().enumerate() {
        check_id(format!("npc_obstacles[{i}].id"), &n.id)?;
    }
    for (i, e) in s.ego_vehicles.iter().enumerate() {
        check_route(&format!("ego_vehicles[{i}].route"), &e.route)?;
        check_start_time(format!("ego_vehicles[{i}].start_time"), e.start_time)?;
    }
    for (i, n) in s.npc_vehicles.iter().enumerate() {
        check_route(&format!("npc_vehicles[{i}].route"), &n.route)?;
        check_start_time(format!("npc_vehicles[{i}].start_time"), n.start_time)?;
    }
    for (i, n) in s.npc_walkers.iter().enumerate() {
        check_route(&format!("npc_walkers[{i}].route"), &n.route)?;
        check_start_time(format!("npc_walkers[{i}].start_time"), n.start_time)?;
    }
    for (i, o) in s.npc_obstacles.iter().enumerate() {
        let l = o.location;
        if !(l.x.is_finite() && l.y.is_finite() && l.heading.is_finite()) {
            return Err(ScenarioError::schema(
                format!("npc_obstacles[{i}].location"),
                "location must be finite",
            ));
        }
    }
    if let Some(r) = s.map_region.region {
        if !(r.min_x < r.max_x && r.min_y < r.max_y) {
            return Err(ScenarioError::schema(
                "map_region.region_segment",
                "need min_x < max_x and min_y < max_y",
            ));
        }
    }
    for (name, v, (lo, hi)) in s.weather.fields() {
        if !(v.is_finite() && v >= lo && v <= hi) {
            return Err(ScenarioError::schema(
                format!("weather.{name}"),
                format!("{v} outside [{lo}, {hi}]"),
            ));
        }
    }
    let tl = s.traffic_lights;
    for (name, v) in [
        ("green_time", tl.green_time),
        ("yellow_time", tl.yellow_time),
        ("red_time", tl.red_time),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(ScenarioError::schema(
                format!("traffic_lights.{name}"),
                "duration must be finite and > 0",
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelClass {
    Vehicle,
    Walker,
    Obstacle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub class: ModelClass,
    pub extent: Extent,
    pub max_speed: f64,
    pub max_accel: f64,
    pub max_decel: f64,
    pub max_steer: f64,
    pub wheelbase: f64,
}

/// Body dimensions and actuation limits per model key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleModelCatalog {
    pub models: BTreeMap<String, ModelSpec>,
}

impl VehicleModelCatalog {
    pub fn builtin() -> Self {
        let vehicle = |length, width, max_speed, max_accel, max_decel, wheelbase| ModelSpec {
            class: ModelClass::Vehicle,
            extent: Extent::new(length, width),
            max_speed,
            max_accel,
            max_decel,
            max_steer: 0.6,
            wheelbase,
        };
        let fixed = |class, length, width| ModelSpec {
            class,
            extent: Extent::new(length, width),
            max_speed: 1.4,
            max_accel: 1.0,
            max_decel: 2.0,
            max_steer: std::f64::consts::FRAC_PI_2,
            wheelbase: length / 2.0,
        };
        let models = BTreeMap::from([
            ("vehicle.sedan".to_string(), vehicle(4.6, 1.9, 15.0, 3.0, 8.0, 2.8)),
            ("vehicle.compact".to_string(), vehicle(3.8, 1.7, 14.0, 3.0, 8.0, 2.4)),
            ("vehicle.suv".to_string(), vehicle(4.9, 2.0, 14.0, 2.5, 7.5, 3.0)),
            ("vehicle.truck".to_string(), vehicle(7.5, 2.5, 12.0, 1.5, 6.0, 4.5)),
            ("walker.pedestrian".to_string(), fixed(ModelClass::Walker, 0.5, 0.5)),
            ("static.barrier".to_string(), fixed(ModelClass::Obstacle, 2.0, 0.6)),
            ("static.cone".to_string(), fixed(ModelClass::Obstacle, 0.4, 0.4)),
        ]);
        Self { models }
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let cat: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        for (key, m) in &cat.models {
            let dims = [
                m.extent.length,
                m.extent.width,
                m.max_speed,
                m.max_accel,
                m.max_decel,
                m.max_steer,
                m.wheelbase,
            ];
            if !dims.iter().all(|v| v.is_finite() && *v > 0.0) {
                return Err(format!("model {key}: all dimensions must be positive"));
            }
            if m.wheelbase >= m.extent.length {
                return Err(format!("model {key}: wheelbase must be shorter than the body"));
            }
        }
        Ok(cat)
    }

    pub fn get(&self, key: &str) -> Option<&ModelSpec> {
        self.models.get(key)
    }

    pub fn keys_of(&self, class: ModelClass) -> Vec<&str> {
        self.models
            .iter()
            .filter(|(_, m)| m.class == class)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

impl Default for VehicleModelCatalog {
    fn default() -> Self {
        Self::builtin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.findings.push(Finding {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        });
    }
}

/// Spawn footprint of every actor: (id, pose, extent). Unknown models are
/// skipped.
pub fn spawn_footprints(s: &Scenario, catalog: &VehicleModelCatalog) -> Vec<(String, Pose, Extent)> {
    let mut out = Vec::new();
    let mut push = |id: &str, model: &str, pose: Pose| {
        if let Some(m) = catalog.get(model) {
            out.push((id.to_string(), pose, m.extent));
        }
    };
    for e in &s.ego_vehicles {
        push(&e.id, &e.model, e.route.start_pose());
    }
    for n in &s.npc_vehicles {
        push(&n.id, &n.model, n.route.start_pose());
    }
    for n in &s.npc_walkers {
        push(&n.id, &n.model, n.route.start_pose());
    }
    for o in &s.npc_obstacles {
        push(&o.id, &o.model, o.location.pose());
    }
    out
}

/// First pair of actors whose spawn footprints intersect.
pub fn find_spawn_overlap(s: &Scenario, catalog: &VehicleModelCatalog) -> Option<(String, String)> {
    let fp = spawn_footprints(s, catalog);
    for i in 0..fp.len() {
        for j in i + 1..fp.len() {
            if geometry::obb_intersects(fp[i].1, fp[i].2, fp[j].1, fp[j].2) {
                return Some((fp[i].0.clone(), fp[j].0.clone()));
            }
        }
    }
    None
}

/// Check a scenario against a map and a model catalog. Findings are data:
/// the scenario is valid iff no finding has severity error.
pub fn validate_scenario(s: &Scenario, net: &RoadNetwork, catalog: &VehicleModelCatalog) -> ValidationReport {
    let mut report = ValidationReport::default();
    if let Err(e) = check_scenario(s) {
        report.error("", e.to_string());
    }
    if s.map_region.town != net.town {
        report.error(
            "map_region.town",
            format!(
                "scenario town {:?} does not match map {:?}",
                s.map_region.town, net.town
            ),
        );
    }

    let check_model = |report: &mut ValidationReport, path: String, key: &str, class: ModelClass| match catalog.get(key)
    {
        None => report.error(path, format!("unknown model {key:?}")),
        Some(m) if m.class != class => report.error(path, format!("model {key:?} is not a {class:?} model")),
        Some(_) => {}
    };
    for (i, e) in s.ego_vehicles.iter().enumerate() {
        check_model(
            &mut report,
            format!("ego_vehicles[{i}].model"),
            &e.model,
            ModelClass::Vehicle,
        );
    }
    for (i, n) in s.npc_vehicles.iter().enumerate() {
        check_model(
            &mut report,
            format!("npc_vehicles[{i}].model"),
            &n.model,
            ModelClass::Vehicle,
        );
    }
    for (i, n) in s.npc_walkers.iter().enumerate() {
        check_model(
            &mut report,
            format!("npc_walkers[{i}].model"),
            &n.model,
            ModelClass::Walker,
        );
    }
    for (i, o) in s.npc_obstacles.iter().enumerate() {
        check_model(
            &mut report,
            format!("npc_obstacles[{i}].model"),
            &o.model,
            ModelClass::Obstacle,
        );
    }

    let routes: Vec<(String, &Route, bool)> = s
        .ego_vehicles
        .iter()
        .enumerate()
        .map(|(i, e)| (format!("ego_vehicles[{i}].route"), &e.route, true))
        .chain(
            s.npc_vehicles
                .iter()
                .enumerate()
                .map(|(i, n)| (format!("npc_vehicles[{i}].route"), &n.route, true)),
        )
        .chain(
            s.npc_walkers
                .iter()
                .enumerate()
                .map(|(i, n)| (format!("npc_walkers[{i}].route"), &n.route, false)),
        )
        .collect();

    if let Some(region) = s.map_region.region {
        for (path, route, _) in &routes {
            for (k, w) in route.waypoints.iter().enumerate() {
                if !region.contains(w.position()) {
                    report.error(format!("{path}[{k}]"), "waypoint outside map region");
                }
            }
        }
        for (i, o) in s.npc_obstacles.iter().enumerate() {
            if !region.contains(Vec2::new(o.location.x, o.location.y)) {
                report.error(format!("npc_obstacles[{i}].location"), "obstacle outside map region");
            }
        }
    }

    // Vehicle routes must follow the lane graph; walker paths are free-form.
    for (path, route, on_lanes) in &routes {
        if !on_lanes || route.waypoints.len() < 2 {
            continue;
        }
        for (k, w) in route.waypoints.windows(2).enumerate() {
            if !net.step_connected(w[0].position(), w[1].position()) {
                report.error(
                    format!("{path}[{k}]"),
                    format!("waypoints {k} and {} are not connected in the lane graph", k + 1),
                );
                break;
            }
        }
    }

    for (i, o) in s.npc_obstacles.iter().enumerate() {
        let lp = net.nearest_lane_point(Vec2::new(o.location.x, o.location.y));
        if lp.lateral.abs() > OBSTACLE_LANE_TOLERANCE {
            report.error(
                format!("npc_obstacles[{i}].location"),
                "obstacle is not on or beside a lane",
            );
        }
    }

    if let Some((a, b)) = find_spawn_overlap(s, catalog) {
        report.error("", format!("spawn footprints of {a} and {b} overlap"));
    }
    report
}
