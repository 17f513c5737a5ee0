use std::collections::BTreeMap;

use thiserror::Error;

use super::kinematics::{kinematic_bicycle_step, KinematicState};
use super::lights::{traffic_light_phase, LightColor};
use super::trace::{ActorKind, ActorState, SceneObs};
use super::SimConfig;
use crate::agents::control::{lookahead_distance, pure_pursuit};
use crate::agents::{AgentAction, AgentLog, JunctionAhead, Observation, VisibleLight};
use crate::geometry::{cumulative_arcs, obb_intersects, point_at_arc, project_on_polyline_range};
use crate::geometry::{Extent, Pose, Vec2};
use crate::network::{Junction, RoadNetwork};
use crate::scenario::{find_spawn_overlap, ModelSpec, Route, Scenario, TrafficLightSpec, VehicleModelCatalog};
use crate::scenario::{Waypoint, WeatherSpec};

/// Proportional gain of the NPC speed controller.
pub const NPC_SPEED_GAIN: f64 = 1.0;
/// NPCs brake to a stop once this close to their route end.
pub const NPC_STOP_MARGIN: f64 = 1.0;
/// Extra slack on route progress when deciding an ego has arrived.
pub const COMPLETION_SLACK: f64 = 1.0;

const PROJECT_BACK: f64 = 2.0;
const PROJECT_AHEAD: f64 = 20.0;
const SPAN_SAMPLE: f64 = 0.5;
const LIGHT_EXTENT: Extent = Extent::new(1.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InitError {
    #[error("invalid sim config: {0}")]
    Config(String),
    #[error("{id}: unknown model {model:?}")]
    UnknownModel { id: String, model: String },
    #[error("{id}: route needs at least two waypoints")]
    DegenerateRoute { id: String },
    #[error("spawn overlap between {0} and {1}")]
    SpawnOverlap(String, String),
}

/// Route polyline with arc-length bookkeeping.
#[derive(Debug, Clone)]
pub struct RouteTrack {
    waypoints: Vec<Waypoint>,
    points: Vec<Vec2>,
    arcs: Vec<f64>,
}

impl RouteTrack {
    pub fn new(route: &Route) -> Self {
        let points = route.points();
        let arcs = cumulative_arcs(&points);
        Self {
            waypoints: route.waypoints.clone(),
            points,
            arcs,
        }
    }

    pub fn total(&self) -> f64 {
        self.arcs[self.arcs.len() - 1]
    }

    /// Index of the segment containing arc `s`.
    pub fn segment_at(&self, s: f64) -> usize {
        self.arcs
            .partition_point(|a| *a <= s)
            .saturating_sub(1)
            .min(self.points.len() - 2)
    }

    pub fn point_at(&self, s: f64) -> (Vec2, Vec2) {
        point_at_arc(&self.points, &self.arcs, s)
    }

    pub fn target_speed_at(&self, s: f64) -> f64 {
        self.waypoints[self.segment_at(s)].target_speed
    }

    /// Arc position of `p`, searched in a window around the previous value
    /// so that self-approaching routes do not jump ahead.
    pub fn project(&self, p: Vec2, prev: f64) -> f64 {
        let first = self.segment_at(prev - PROJECT_BACK);
        let last = self.segment_at(prev + PROJECT_AHEAD) + 1;
        project_on_polyline_range(&self.points, &self.arcs, p, first, last).arc
    }

    /// Route from arc `s` onward. The first waypoint is the point at `s`
    /// with the target speed of its segment.
    pub fn remaining(&self, s: f64) -> Route {
        let s = s.clamp(0.0, self.total());
        let seg = self.segment_at(s);
        let (p, _) = self.point_at(s);
        let mut waypoints = vec![Waypoint::new(p.x, p.y, self.waypoints[seg].target_speed)];
        for w in &self.waypoints[seg + 1..] {
            if w.position().dist(p) > 1e-9 || waypoints.len() > 1 {
                waypoints.push(w.clone());
            }
        }
        Route { waypoints }
    }

    /// Vertices from arc `s` up to at least `length` further along.
    fn path_ahead(&self, s: f64, length: f64) -> Vec<Vec2> {
        let s = s.clamp(0.0, self.total());
        let seg = self.segment_at(s);
        let mut out = vec![self.point_at(s).0];
        for i in seg + 1..self.points.len() {
            out.push(self.points[i]);
            if self.arcs[i] >= s + length {
                break;
            }
        }
        out
    }
}

/// Stretch of a route inside a junction disc.
#[derive(Debug, Clone, PartialEq)]
struct JunctionSpan {
    junction: usize,
    entry: f64,
    exit: f64,
    /// Signal group governing the approach, for signalized junctions.
    group: Option<u8>,
}

fn junction_spans(track: &RouteTrack, net: &RoadNetwork) -> Vec<JunctionSpan> {
    let total = track.total();
    let n = (total / SPAN_SAMPLE).ceil() as usize;
    let samples: Vec<(f64, Vec2)> = (0..=n)
        .map(|k| {
            let s = (k as f64 * SPAN_SAMPLE).min(total);
            (s, track.point_at(s).0)
        })
        .collect();
    let mut spans = Vec::new();
    for (ji, j) in net.junctions.iter().enumerate() {
        let mut open: Option<f64> = None;
        for &(s, p) in &samples {
            let inside = p.dist(j.center) <= j.radius;
            match (inside, open) {
                (true, None) => open = Some(s),
                (false, Some(entry)) => {
                    spans.push(span(track, net, ji, j, entry, s));
                    open = None;
                }
                _ => {}
            }
        }
        if let Some(entry) = open {
            spans.push(span(track, net, ji, j, entry, total));
        }
    }
    spans.sort_by(|a, b| a.entry.total_cmp(&b.entry).then(a.junction.cmp(&b.junction)));
    spans
}

fn span(track: &RouteTrack, net: &RoadNetwork, ji: usize, j: &Junction, entry: f64, exit: f64) -> JunctionSpan {
    let group = if j.signalized && entry > 0.0 {
        let probe = track.point_at((entry - 1.0).max(0.0)).0;
        net.lanes_near(probe, 1.0).iter().find_map(|lp| {
            j.approaches
                .iter()
                .find(|a| a.lane_id == lp.lane_id)
                .map(|a| a.signal_group)
        })
    } else {
        None
    };
    JunctionSpan {
        junction: ji,
        entry,
        exit,
        group,
    }
}

#[derive(Debug, Clone)]
struct Mover {
    id: String,
    model: ModelSpec,
    start_time: f64,
    state: KinematicState,
    track: RouteTrack,
    progress: f64,
}

impl Mover {
    fn new(id: &str, model: ModelSpec, route: &Route, start_time: f64) -> Self {
        let pose = route.start_pose();
        Self {
            id: id.to_string(),
            model,
            start_time,
            state: KinematicState {
                x: pose.x,
                y: pose.y,
                heading: pose.heading,
                speed: 0.0,
            },
            track: RouteTrack::new(route),
            progress: 0.0,
        }
    }

    fn active_at(&self, t: f64) -> bool {
        t + 1e-9 >= self.start_time
    }

    fn actor_state(&self, kind: ActorKind, t: f64) -> ActorState {
        ActorState {
            id: self.id.clone(),
            kind,
            x: self.state.x,
            y: self.state.y,
            heading: self.state.heading,
            speed: self.state.speed,
            extent: self.model.extent,
            active: self.active_at(t),
            route_progress: self.progress,
            phase: None,
        }
    }

    fn drive(&mut self, accel: f64, steer: f64, dt: f64) {
        self.state = kinematic_bicycle_step(self.state, accel, steer, self.model.wheelbase, self.model.max_speed, dt);
        self.progress = self.track.project(Vec2::new(self.state.x, self.state.y), self.progress);
    }
}

#[derive(Debug, Clone)]
struct EgoActor {
    mover: Mover,
    completed: bool,
    spans: Vec<JunctionSpan>,
}

#[derive(Debug, Clone)]
struct ObstacleActor {
    id: String,
    extent: Extent,
    pose: Pose,
}

/// Full simulator state between steps.
#[derive(Debug, Clone)]
pub struct WorldState {
    cfg: SimConfig,
    lights: TrafficLightSpec,
    weather: WeatherSpec,
    step: u64,
    egos: Vec<EgoActor>,
    npcs: Vec<Mover>,
    walkers: Vec<Mover>,
    obstacles: Vec<ObstacleActor>,
    junctions: Vec<Junction>,
}

pub fn init_world(
    s: &Scenario,
    net: &RoadNetwork,
    catalog: &VehicleModelCatalog,
    cfg: &SimConfig,
) -> Result<WorldState, InitError> {
    cfg.check().map_err(InitError::Config)?;
    let model = |id: &str, key: &str| {
        catalog.get(key).copied().ok_or_else(|| InitError::UnknownModel {
            id: id.to_string(),
            model: key.to_string(),
        })
    };
    let check_route = |id: &str, r: &Route| {
        if r.waypoints.len() < 2 || r.length() <= 0.0 {
            Err(InitError::DegenerateRoute { id: id.to_string() })
        } else {
            Ok(())
        }
    };
    let mut egos = Vec::new();
    for e in &s.ego_vehicles {
        check_route(&e.id, &e.route)?;
        let mover = Mover::new(&e.id, model(&e.id, &e.model)?, &e.route, e.start_time);
        let spans = junction_spans(&mover.track, net);
        egos.push(EgoActor {
            mover,
            completed: false,
            spans,
        });
    }
    let mut npcs = Vec::new();
    for n in &s.npc_vehicles {
        check_route(&n.id, &n.route)?;
        npcs.push(Mover::new(&n.id, model(&n.id, &n.model)?, &n.route, n.start_time));
    }
    let mut walkers = Vec::new();
    for w in &s.npc_walkers {
        check_route(&w.id, &w.route)?;
        walkers.push(Mover::new(&w.id, model(&w.id, &w.model)?, &w.route, w.start_time));
    }
    let mut obstacles = Vec::new();
    for o in &s.npc_obstacles {
        obstacles.push(ObstacleActor {
            id: o.id.clone(),
            extent: model(&o.id, &o.model)?.extent,
            pose: o.location.pose(),
        });
    }
    if let Some((a, b)) = find_spawn_overlap(s, catalog) {
        return Err(InitError::SpawnOverlap(a, b));
    }
    Ok(WorldState {
        cfg: cfg.clone(),
        lights: s.traffic_lights,
        weather: s.weather,
        step: 0,
        egos,
        npcs,
        walkers,
        obstacles,
        junctions: net.junctions.clone(),
    })
}

/// NPC controller: pure pursuit on the route and proportional control toward
/// the target speed of the current route segment; full braking with zero
/// steer near the route end.
pub fn npc_vehicle_action(track: &RouteTrack, state: &KinematicState, progress: f64, model: &ModelSpec) -> (f64, f64) {
    if track.total() - progress <= NPC_STOP_MARGIN {
        return (-model.max_decel, 0.0);
    }
    let target = track.target_speed_at(progress).min(model.max_speed);
    let accel = (NPC_SPEED_GAIN * (target - state.speed)).clamp(-model.max_decel, model.max_accel);
    let lookahead = lookahead_distance(state.speed);
    let path = track.path_ahead(progress, lookahead);
    let steer = pure_pursuit(state.pose(), &path, lookahead, model.wheelbase, model.max_steer);
    (accel, steer)
}

impl WorldState {
    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn weather(&self) -> &WeatherSpec {
        &self.weather
    }

    pub fn ego_count(&self) -> usize {
        self.egos.len()
    }

    pub fn ego_id(&self, i: usize) -> &str {
        &self.egos[i].mover.id
    }

    pub fn ego_model(&self, i: usize) -> &ModelSpec {
        &self.egos[i].mover.model
    }

    pub fn ego_active(&self, i: usize) -> bool {
        self.egos[i].mover.active_at(self.time())
    }

    pub fn ego_completed(&self, i: usize) -> bool {
        self.egos[i].completed
    }

    pub fn all_completed(&self) -> bool {
        self.egos.iter().all(|e| e.completed)
    }

    pub fn light_phase(&self) -> (LightColor, LightColor) {
        traffic_light_phase(self.time(), &self.lights)
    }

    /// Advance one step. `actions[i]` drives ego `i`; a missing action for an
    /// active ego means full braking.
    pub fn step(&mut self, actions: &[Option<AgentAction>]) {
        let t = self.time();
        let dt = self.cfg.dt;
        for npc in &mut self.npcs {
            if npc.active_at(t) {
                let (accel, steer) = npc_vehicle_action(&npc.track, &npc.state, npc.progress, &npc.model);
                npc.drive(accel, steer, dt);
            }
        }
        for w in &mut self.walkers {
            if w.active_at(t) {
                let total = w.track.total();
                w.progress = (w.progress + w.model.max_speed * dt).min(total);
                let (p, dir) = w.track.point_at(w.progress);
                w.state = KinematicState {
                    x: p.x,
                    y: p.y,
                    heading: dir.y.atan2(dir.x),
                    speed: if w.progress < total { w.model.max_speed } else { 0.0 },
                };
            }
        }
        for (i, ego) in self.egos.iter_mut().enumerate() {
            let m = &mut ego.mover;
            if !m.active_at(t) {
                continue;
            }
            let a = actions
                .get(i)
                .copied()
                .flatten()
                .unwrap_or(AgentAction {
                    accel: -m.model.max_decel,
                    steer: 0.0,
                })
                .clamped(&m.model);
            m.drive(a.accel, a.steer, dt);
        }
        self.step += 1;
        let goal_radius = self.cfg.goal_radius;
        for ego in &mut self.egos {
            let m = &ego.mover;
            let goal = m.track.points[m.track.points.len() - 1];
            let at_goal = Vec2::new(m.state.x, m.state.y).dist(goal) <= goal_radius
                && m.progress >= m.track.total() - goal_radius - COMPLETION_SLACK;
            if at_goal {
                ego.completed = true;
            }
        }
    }

    fn collidables(&self) -> Vec<ActorState> {
        let t = self.time();
        let mut out: Vec<ActorState> = self
            .egos
            .iter()
            .map(|e| e.mover.actor_state(ActorKind::Ego, t))
            .collect();
        out.extend(self.npcs.iter().map(|n| n.actor_state(ActorKind::NpcVehicle, t)));
        out.extend(self.walkers.iter().map(|w| w.actor_state(ActorKind::Walker, t)));
        out.extend(self.obstacles.iter().map(|o| ActorState {
            id: o.id.clone(),
            kind: ActorKind::Obstacle,
            x: o.pose.x,
            y: o.pose.y,
            heading: o.pose.heading,
            speed: 0.0,
            extent: o.extent,
            active: true,
            route_progress: 0.0,
            phase: None,
        }));
        out
    }

    /// Intersecting pairs involving at least one ego, ids ordered as
    /// (ego, other).
    pub fn ego_collisions(&self) -> Vec<(String, String)> {
        let actors = self.collidables();
        let n_egos = self.egos.len();
        let mut out = Vec::new();
        for i in 0..n_egos {
            let a = &actors[i];
            for b in actors.iter().skip(i + 1) {
                let reach = a.extent.length.hypot(a.extent.width) + b.extent.length.hypot(b.extent.width);
                if (a.x - b.x).hypot(a.y - b.y) > reach / 2.0 {
                    continue;
                }
                if obb_intersects(a.pose(), a.extent, b.pose(), b.extent) {
                    out.push((a.id.clone(), b.id.clone()));
                }
            }
        }
        out
    }

    /// Ground-truth observation for ego `i`.
    pub fn observe(&self, i: usize) -> Observation {
        let t = self.time();
        let ego = &self.egos[i];
        let m = &ego.mover;
        let me = Vec2::new(m.state.x, m.state.y);
        let radius = self.cfg.sensing_radius;
        let mut nearby: Vec<(f64, ActorState)> = self
            .collidables()
            .into_iter()
            .filter(|a| a.id != m.id)
            .map(|a| (Vec2::new(a.x, a.y).dist(me), a))
            .filter(|(d, _)| *d <= radius)
            .collect();
        nearby.sort_by(|(da, a), (db, b)| da.total_cmp(db).then_with(|| a.id.cmp(&b.id)));

        let (g0, g1) = self.light_phase();
        let next_entry = ego.spans.iter().find(|sp| sp.entry > m.progress);
        let visible_light = next_entry.and_then(|sp| {
            let group = sp.group?;
            let distance = sp.entry - m.progress;
            (distance <= radius).then(|| VisibleLight {
                junction_id: self.junctions[sp.junction].junction_id.clone(),
                phase: if group == 0 { g0 } else { g1 },
                distance,
            })
        });
        let junction_ahead = ego
            .spans
            .iter()
            .find(|sp| sp.exit > m.progress && sp.entry - m.progress <= radius)
            .map(|sp| {
                let j = &self.junctions[sp.junction];
                JunctionAhead {
                    junction_id: j.junction_id.clone(),
                    x: j.center.x,
                    y: j.center.y,
                    radius: j.radius,
                    distance_to_entry: sp.entry - m.progress,
                }
            });
        Observation {
            step: self.step,
            timestamp: t,
            self_state: m.actor_state(ActorKind::Ego, t),
            nearby_actors: nearby.into_iter().map(|(_, a)| a).collect(),
            visible_light,
            junction_ahead,
            remaining_route: m.track.remaining(m.progress),
        }
    }

    /// Snapshot of every actor, including one entry per signal group.
    pub fn scene_obs(&self, agent_logs: BTreeMap<String, AgentLog>) -> SceneObs {
        let t = self.time();
        let mut actors = self.collidables();
        let others = actors.split_off(self.egos.len());
        let mut other_actors = others;
        let (g0, g1) = self.light_phase();
        for j in self.junctions.iter().filter(|j| j.signalized) {
            for (g, phase) in [(0, g0), (1, g1)] {
                other_actors.push(ActorState {
                    id: format!("{}:g{g}", j.junction_id),
                    kind: ActorKind::TrafficLight,
                    x: j.center.x,
                    y: j.center.y,
                    heading: 0.0,
                    speed: 0.0,
                    extent: LIGHT_EXTENT,
                    active: true,
                    route_progress: 0.0,
                    phase: Some(phase),
                });
            }
        }
        SceneObs {
            step: self.step,
            timestamp: t,
            egos: actors,
            other_actors,
            agent_logs,
        }
    }
}
