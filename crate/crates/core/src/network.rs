//! Lane-graph road maps: loading, projection, routing and the bundled demo town.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon;
use crate::geometry::{self, Vec2};
use crate::scenario::{Route, Waypoint};

/// Waypoint spacing of generated routes.
pub const ROUTE_STEP: f64 = 2.0;
/// Maximum distance between a query point and its lane for routing.
pub const MAX_SNAP_DISTANCE: f64 = 5.0;
/// A waypoint counts as "on" a lane within this lateral distance.
pub const ON_LANE_TOLERANCE: f64 = 0.5;

pub const DEMO_TOWN: &str = "Town01-lite";
const DEMO_TOWN_JSON: &str = include_str!("../data/maps/Town01-lite.json");

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("cannot read map {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("map parse error: {0}")]
    Parse(String),
    #[error("lane {lane_id}: {message}")]
    Integrity { lane_id: String, message: String },
    #[error("unknown town {town:?}; available towns: {available}")]
    UnknownTown { town: String, available: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum RouteError {
    #[error("no lane within {MAX_SNAP_DISTANCE} m of ({x:.3}, {y:.3})")]
    NoLaneNearPoint { x: f64, y: f64 },
    #[error("goal is unreachable from start")]
    Unreachable,
    #[error("start and goal coincide; a route needs positive length")]
    Degenerate,
}

#[derive(Debug, Error, PartialEq)]
pub enum SeedError {
    #[error("no route with length in [{min_length}, {max_length}] m found after {budget} draws")]
    Infeasible {
        min_length: f64,
        max_length: f64,
        budget: usize,
    },
    #[error("invalid seed request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lane {
    pub lane_id: String,
    #[serde(with = "point_list")]
    pub centerline: Vec<Vec2>,
    pub successors: Vec<String>,
    pub speed_limit: f64,
    #[serde(skip)]
    arcs: Vec<f64>,
}

impl Lane {
    pub fn new(lane_id: impl Into<String>, centerline: Vec<Vec2>, successors: Vec<String>, speed_limit: f64) -> Self {
        let arcs = geometry::cumulative_arcs(&centerline);
        Self {
            lane_id: lane_id.into(),
            centerline,
            successors,
            speed_limit,
            arcs,
        }
    }

    pub fn length(&self) -> f64 {
        *self.arcs.last().unwrap_or(&0.0)
    }

    pub fn arcs(&self) -> &[f64] {
        &self.arcs
    }

    pub fn point_at(&self, s: f64) -> (Vec2, Vec2) {
        geometry::point_at_arc(&self.centerline, &self.arcs, s)
    }

    pub fn project(&self, p: Vec2) -> geometry::Projection {
        geometry::project_on_polyline(&self.centerline, &self.arcs, p)
    }

    pub fn start(&self) -> Vec2 {
        self.centerline[0]
    }

    pub fn end(&self) -> Vec2 {
        *self.centerline.last().expect("lane has points")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Approach {
    pub lane_id: String,
    pub signal_group: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Junction {
    pub junction_id: String,
    #[serde(with = "point")]
    pub center: Vec2,
    /// Half-size of the junction box; approach lanes end on its boundary.
    pub radius: f64,
    pub members: Vec<String>,
    pub signalized: bool,
    pub approaches: Vec<Approach>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    town: String,
    lanes: Vec<Lane>,
    junctions: Vec<Junction>,
}

/// Position on a lane centerline.
#[derive(Debug, Clone, PartialEq)]
pub struct LanePoint {
    pub lane_id: String,
    pub arc: f64,
    /// Signed offset, positive to the left of the lane direction.
    pub lateral: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    pub town: String,
    pub lanes: BTreeMap<String, Lane>,
    pub junctions: Vec<Junction>,
    predecessors: BTreeMap<String, Vec<String>>,
    junction_of_lane: BTreeMap<String, usize>,
}

impl RoadNetwork {
    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        let file: MapFile = serde_json::from_str(text).map_err(|e| NetworkError::Parse(e.to_string()))?;
        Self::from_parts(file.town, file.lanes, file.junctions)
    }

    pub fn from_parts(town: String, lanes: Vec<Lane>, junctions: Vec<Junction>) -> Result<Self, NetworkError> {
        let mut map = BTreeMap::new();
        for lane in lanes {
            let lane = Lane::new(lane.lane_id, lane.centerline, lane.successors, lane.speed_limit);
            let bad = |message: &str| NetworkError::Integrity {
                lane_id: lane.lane_id.clone(),
                message: message.to_string(),
            };
            if lane.centerline.len() < 2 {
                return Err(bad("centerline needs at least two points"));
            }
            if !lane.centerline.iter().all(|p| p.is_finite()) {
                return Err(bad("centerline has non-finite coordinates"));
            }
            if lane.length() <= 0.0 {
                return Err(bad("centerline has zero length"));
            }
            if !(lane.speed_limit.is_finite() && lane.speed_limit > 0.0) {
                return Err(bad("speed limit must be positive"));
            }
            if map.contains_key(&lane.lane_id) {
                return Err(bad("duplicate lane id"));
            }
            map.insert(lane.lane_id.clone(), lane);
        }
        let mut predecessors: BTreeMap<String, Vec<String>> = map.keys().map(|k| (k.clone(), Vec::new())).collect();
        for lane in map.values() {
            for succ in &lane.successors {
                match predecessors.get_mut(succ) {
                    Some(p) => p.push(lane.lane_id.clone()),
                    None => {
                        return Err(NetworkError::Integrity {
                            lane_id: succ.clone(),
                            message: format!("successor of {} does not exist", lane.lane_id),
                        })
                    }
                }
            }
        }
        let mut junction_of_lane = BTreeMap::new();
        for (idx, j) in junctions.iter().enumerate() {
            for m in &j.members {
                if !map.contains_key(m) {
                    return Err(NetworkError::Integrity {
                        lane_id: m.clone(),
                        message: format!("member of junction {} does not exist", j.junction_id),
                    });
                }
                junction_of_lane.insert(m.clone(), idx);
            }
            let mut seen = BTreeSet::new();
            for a in &j.approaches {
                if !map.contains_key(&a.lane_id) {
                    return Err(NetworkError::Integrity {
                        lane_id: a.lane_id.clone(),
                        message: format!("approach of junction {} does not exist", j.junction_id),
                    });
                }
                if !seen.insert(a.lane_id.clone()) {
                    return Err(NetworkError::Integrity {
                        lane_id: a.lane_id.clone(),
                        message: format!("approach listed twice in junction {}", j.junction_id),
                    });
                }
                if j.signalized && a.signal_group > 1 {
                    return Err(NetworkError::Integrity {
                        lane_id: a.lane_id.clone(),
                        message: format!("signal group must be 0 or 1 in junction {}", j.junction_id),
                    });
                }
            }
        }
        Ok(Self {
            town,
            lanes: map,
            junctions,
            predecessors,
            junction_of_lane,
        })
    }

    /// Canonical map document.
    pub fn to_json(&self) -> String {
        let file = MapFile {
            town: self.town.clone(),
            lanes: self.lanes.values().cloned().collect(),
            junctions: self.junctions.clone(),
        };
        canon::to_canonical_string(&file, 3)
    }

    pub fn lane(&self, id: &str) -> Option<&Lane> {
        self.lanes.get(id)
    }

    pub fn predecessors(&self, id: &str) -> &[String] {
        self.predecessors.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Junction owning a connector lane.
    pub fn junction_of(&self, lane_id: &str) -> Option<&Junction> {
        self.junction_of_lane.get(lane_id).map(|&i| &self.junctions[i])
    }

    /// Lanes that are not junction connectors, in id order.
    pub fn road_lanes(&self) -> Vec<&Lane> {
        self.lanes
            .values()
            .filter(|l| !self.junction_of_lane.contains_key(&l.lane_id))
            .collect()
    }

    /// Lane point with the smallest perpendicular distance to `p`; ties go to
    /// the lexicographically smallest lane id.
    pub fn nearest_lane_point(&self, p: Vec2) -> LanePoint {
        let mut best: Option<(f64, LanePoint)> = None;
        for lane in self.lanes.values() {
            let pr = lane.project(p);
            if best.as_ref().is_none_or(|(d, _)| pr.distance < *d) {
                best = Some((
                    pr.distance,
                    LanePoint {
                        lane_id: lane.lane_id.clone(),
                        arc: pr.arc,
                        lateral: pr.lateral,
                    },
                ));
            }
        }
        best.expect("network has lanes").1
    }

    /// Every lane whose centerline passes within `tol` of `p`.
    pub fn lanes_near(&self, p: Vec2, tol: f64) -> Vec<LanePoint> {
        self.lanes
            .values()
            .filter_map(|lane| {
                let pr = lane.project(p);
                (pr.distance <= tol).then(|| LanePoint {
                    lane_id: lane.lane_id.clone(),
                    arc: pr.arc,
                    lateral: pr.lateral,
                })
            })
            .collect()
    }

    /// Shortest driving distance along the lane graph between two lane
    /// points, or `None` when it exceeds `limit`.
    pub fn graph_distance(&self, from: &LanePoint, to: &LanePoint, limit: f64) -> Option<f64> {
        if from.lane_id == to.lane_id && to.arc >= from.arc - 1e-6 {
            let d = (to.arc - from.arc).max(0.0);
            return (d <= limit).then_some(d);
        }
        let first = self.lanes.get(&from.lane_id)?;
        let base = first.length() - from.arc;
        let dist = self.lane_distances(&from.lane_id, limit);
        let reach = dist.get(to.lane_id.as_str())?;
        let total = base + reach + to.arc;
        (total <= limit).then_some(total)
    }

    /// Dijkstra over lanes: cost from the end of `origin` to the start of each
    /// reachable lane, pruned at `limit`. Deterministic ordering by (cost, id).
    fn lane_distances<'a>(&'a self, origin: &str, limit: f64) -> BTreeMap<&'a str, f64> {
        #[derive(PartialEq)]
        struct Item<'a>(f64, &'a str);
        impl Eq for Item<'_> {}
        impl Ord for Item<'_> {
            fn cmp(&self, o: &Self) -> Ordering {
                o.0.total_cmp(&self.0).then_with(|| o.1.cmp(self.1))
            }
        }
        impl PartialOrd for Item<'_> {
            fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
                Some(self.cmp(o))
            }
        }

        let mut dist: BTreeMap<&str, f64> = BTreeMap::new();
        let mut heap = BinaryHeap::new();
        if let Some(lane) = self.lanes.get(origin) {
            for s in &lane.successors {
                let s = self.lanes.get_key_value(s).expect("closed successor set").0.as_str();
                if dist.get(s).is_none_or(|&d| 0.0 < d) {
                    dist.insert(s, 0.0);
                    heap.push(Item(0.0, s));
                }
            }
        }
        while let Some(Item(cost, id)) = heap.pop() {
            if dist.get(id).is_some_and(|&d| cost > d) {
                continue;
            }
            let lane = &self.lanes[id];
            let next = cost + lane.length();
            if next > limit {
                continue;
            }
            for s in &lane.successors {
                let s = self.lanes.get_key_value(s).expect("closed successor set").0.as_str();
                if dist.get(s).is_none_or(|&d| next < d) {
                    dist.insert(s, next);
                    heap.push(Item(next, s));
                }
            }
        }
        dist
    }

    /// Whether a straight step between two route points follows the lane graph.
    pub fn step_connected(&self, a: Vec2, b: Vec2) -> bool {
        let chord = a.dist(b);
        let limit = 1.25 * chord + 1.0;
        let from = self.lanes_near(a, ON_LANE_TOLERANCE);
        let to = self.lanes_near(b, ON_LANE_TOLERANCE);
        from.iter()
            .any(|f| to.iter().any(|t| self.graph_distance(f, t, limit).is_some()))
    }

    /// Minimum-length route between the lane points nearest `start` and `goal`.
    pub fn shortest_route(&self, start: Vec2, goal: Vec2) -> Result<Route, RouteError> {
        let snap = |p: Vec2| {
            let lp = self.nearest_lane_point(p);
            if lp.lateral.abs() > MAX_SNAP_DISTANCE {
                Err(RouteError::NoLaneNearPoint { x: p.x, y: p.y })
            } else {
                Ok(lp)
            }
        };
        let a = snap(start)?;
        let b = snap(goal)?;
        self.route_between(&a, &b)
    }

    /// Route between two lane points, discretized every [`ROUTE_STEP`] metres.
    pub fn route_between(&self, from: &LanePoint, to: &LanePoint) -> Result<Route, RouteError> {
        let pieces = self.lane_path(from, to)?;
        Ok(self.discretize(&pieces))
    }

    /// Shortest sequence of (lane, from_arc, to_arc) pieces.
    pub fn lane_path(&self, from: &LanePoint, to: &LanePoint) -> Result<Vec<(String, f64, f64)>, RouteError> {
        let first = self.lanes.get(&from.lane_id).ok_or(RouteError::Unreachable)?;
        if !self.lanes.contains_key(&to.lane_id) {
            return Err(RouteError::Unreachable);
        }
        if from.lane_id == to.lane_id && to.arc > from.arc {
            if to.arc - from.arc < 0.01 {
                return Err(RouteError::Degenerate);
            }
            return Ok(vec![(from.lane_id.clone(), from.arc, to.arc)]);
        }
        if from.lane_id == to.lane_id && (to.arc - from.arc).abs() < 0.01 {
            return Err(RouteError::Degenerate);
        }
        let dist = self.lane_distances(&from.lane_id, f64::INFINITY);
        if !dist.contains_key(to.lane_id.as_str()) {
            return Err(RouteError::Unreachable);
        }
        // Walk predecessors back from the goal lane along tight edges.
        let mut chain = vec![to.lane_id.clone()];
        let mut cur = to.lane_id.clone();
        while dist[cur.as_str()] > 0.0 {
            let cost = dist[cur.as_str()];
            let prev = self
                .predecessors(&cur)
                .iter()
                .filter_map(|p| dist.get(p.as_str()).map(|d| (p, d + self.lanes[p].length())))
                .filter(|(_, c)| (c - cost).abs() <= 1e-9 * (1.0 + cost))
                .map(|(p, _)| p.clone())
                .next()
                .ok_or(RouteError::Unreachable)?;
            chain.push(prev.clone());
            cur = prev;
        }
        chain.reverse();
        let mut pieces = vec![(from.lane_id.clone(), from.arc, first.length())];
        let last = chain.len() - 1;
        for (i, id) in chain.into_iter().enumerate() {
            let end = if i == last { to.arc } else { self.lanes[&id].length() };
            pieces.push((id, 0.0, end));
        }
        Ok(pieces)
    }

    fn discretize(&self, pieces: &[(String, f64, f64)]) -> Route {
        // Concatenated polyline with the speed limit of each segment.
        let mut pts: Vec<Vec2> = Vec::new();
        let mut seg_speed: Vec<f64> = Vec::new();
        for (id, s0, s1) in pieces {
            let lane = &self.lanes[id];
            let mut local = vec![lane.point_at(*s0).0];
            for (p, &a) in lane.centerline.iter().zip(lane.arcs()) {
                if a > *s0 + 1e-9 && a < *s1 - 1e-9 {
                    local.push(*p);
                }
            }
            local.push(lane.point_at(*s1).0);
            for p in local {
                if let Some(&last) = pts.last() {
                    if last.dist(p) < 1e-9 {
                        continue;
                    }
                    seg_speed.push(lane.speed_limit);
                }
                pts.push(p);
            }
        }
        let arcs = geometry::cumulative_arcs(&pts);
        let total = *arcs.last().unwrap_or(&0.0);
        let speed_at = |s: f64| {
            let i = arcs.partition_point(|&a| a <= s).saturating_sub(1);
            seg_speed[i.min(seg_speed.len() - 1)]
        };
        let mut waypoints = Vec::new();
        let mut s = 0.0;
        while s < total - 0.05 {
            let (p, _) = geometry::point_at_arc(&pts, &arcs, s);
            waypoints.push(Waypoint::new(canon::quantize(p.x), canon::quantize(p.y), speed_at(s)));
            s += ROUTE_STEP;
        }
        let end = pts[pts.len() - 1];
        waypoints.push(Waypoint::new(
            canon::quantize(end.x),
            canon::quantize(end.y),
            *seg_speed.last().expect("route has a segment"),
        ));
        Route { waypoints }
    }

    /// Generate `num` single-ego seed scenarios whose route lengths lie in
    /// `[min_length, max_length]`. Each seed gets up to
    /// [`SEED_DRAW_BUDGET`] random start/goal draws.
    pub fn generate_seed_scenarios(
        &self,
        num: usize,
        min_length: f64,
        max_length: f64,
        rng_seed: u64,
    ) -> Result<Vec<crate::scenario::Scenario>, SeedError> {
        use rand::{Rng, SeedableRng};

        if num == 0 {
            return Err(SeedError::InvalidRequest("num must be at least 1".into()));
        }
        if !(min_length > 0.0 && min_length < max_length) {
            return Err(SeedError::InvalidRequest("need 0 < min_length < max_length".into()));
        }
        let candidates = self.road_lanes();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(rng_seed);
        let mut out = Vec::with_capacity(num);
        for i in 0..num {
            let mut found = None;
            for _ in 0..SEED_DRAW_BUDGET {
                let la = candidates[rng.random_range(0..candidates.len())];
                let lb = candidates[rng.random_range(0..candidates.len())];
                let a = LanePoint {
                    lane_id: la.lane_id.clone(),
                    arc: rng.random_range(0.0..la.length()),
                    lateral: 0.0,
                };
                let b = LanePoint {
                    lane_id: lb.lane_id.clone(),
                    arc: rng.random_range(0.0..lb.length()),
                    lateral: 0.0,
                };
                let Ok(route) = self.route_between(&a, &b) else {
                    continue;
                };
                let len = route.length();
                if len >= min_length && len <= max_length {
                    found = Some(route);
                    break;
                }
            }
            let route = found.ok_or(SeedError::Infeasible {
                min_length,
                max_length,
                budget: SEED_DRAW_BUDGET,
            })?;
            out.push(crate::scenario::Scenario::seed(
                format!("seed_{i:03}"),
                &self.town,
                route,
            ));
        }
        Ok(out)
    }
}

pub const SEED_DRAW_BUDGET: usize = 10_000;

/// Load a map file.
pub fn load_network(path: impl AsRef<Path>) -> Result<RoadNetwork, NetworkError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| NetworkError::Io {
        path: path.display().to_string(),
        source,
    })?;
    RoadNetwork::from_json(&text)
}

/// Names of maps shipped with the crate.
pub fn available_towns() -> Vec<&'static str> {
    vec![DEMO_TOWN]
}

/// Load a bundled map by town name.
pub fn bundled_network(town: &str) -> Result<RoadNetwork, NetworkError> {
    match town {
        DEMO_TOWN => RoadNetwork::from_json(DEMO_TOWN_JSON),
        _ => Err(NetworkError::UnknownTown {
            town: town.to_string(),
            available: available_towns().join(", "),
        }),
    }
}

/// Convenience for the demo town.
pub fn demo_network() -> RoadNetwork {
    bundled_network(DEMO_TOWN).expect("bundled demo map is valid")
}

pub fn route_length(route: &Route) -> f64 {
    route.length()
}

/// Builder for square-grid towns of two-lane roads (one lane per direction,
/// right-hand traffic). Interior four-way junctions are signalized with
/// east-west approaches in group 0 and north-south approaches in group 1.
pub mod grid {
    use super::*;

    pub const LANE_OFFSET: f64 = 1.75;
    pub const SETBACK: f64 = 12.0;
    pub const ROAD_SPEED: f64 = 10.0;
    pub const STRAIGHT_SPEED: f64 = 10.0;
    pub const TURN_SPEED: f64 = 6.0;
    const ARC_SUBDIVISIONS: usize = 16;

    const DIRS: [(char, (i32, i32)); 4] = [('E', (1, 0)), ('N', (0, 1)), ('S', (0, -1)), ('W', (-1, 0))];

    fn right(d: Vec2) -> Vec2 {
        Vec2::new(d.y, -d.x)
    }

    fn road_id(a: (i32, i32), b: (i32, i32)) -> String {
        format!("r_{}{}_{}{}", a.0, a.1, b.0, b.1)
    }

    fn connector_id(n: (i32, i32), din: char, dout: char) -> String {
        format!("c_{}{}_{}{}", n.0, n.1, din, dout)
    }

    pub fn build_grid_town(town: &str, nodes_per_side: i32, block: f64) -> RoadNetwork {
        let inside = |(i, j): (i32, i32)| i >= 0 && j >= 0 && i < nodes_per_side && j < nodes_per_side;
        let pos = |(i, j): (i32, i32)| Vec2::new(i as f64 * block, j as f64 * block);
        let mut lanes = Vec::new();
        let mut junctions = Vec::new();

        for i in 0..nodes_per_side {
            for j in 0..nodes_per_side {
                let node = (i, j);
                let c = pos(node);
                // Outgoing road lanes.
                for &(_, (dx, dy)) in &DIRS {
                    let nb = (i + dx, j + dy);
                    if !inside(nb) {
                        continue;
                    }
                    let d = Vec2::new(dx as f64, dy as f64);
                    let off = right(d) * LANE_OFFSET;
                    let start = c + d * SETBACK + off;
                    let end = pos(nb) - d * SETBACK + off;
                    // Successors: connectors at the far node entering with direction d.
                    let mut succ = Vec::new();
                    let din = DIRS.iter().find(|(_, v)| *v == (dx, dy)).expect("dir").0;
                    for &(dout, (ox, oy)) in &DIRS {
                        if (ox, oy) == (-dx, -dy) || !inside((nb.0 + ox, nb.1 + oy)) {
                            continue;
                        }
                        succ.push(connector_id(nb, din, dout));
                    }
                    succ.sort();
                    lanes.push(Lane::new(road_id(node, nb), vec![start, end], succ, ROAD_SPEED));
                }
                // Connectors and the junction record.
                let mut members = Vec::new();
                let mut approaches = Vec::new();
                let mut degree = 0;
                for &(din, (dx, dy)) in &DIRS {
                    let from = (i - dx, j - dy);
                    if !inside(from) {
                        continue;
                    }
                    degree += 1;
                    approaches.push(Approach {
                        lane_id: road_id(from, node),
                        signal_group: if dy == 0 { 0 } else { 1 },
                    });
                    let d_in = Vec2::new(dx as f64, dy as f64);
                    let p0 = c - d_in * SETBACK + right(d_in) * LANE_OFFSET;
                    for &(dout, (ox, oy)) in &DIRS {
                        let to = (i + ox, j + oy);
                        if (ox, oy) == (-dx, -dy) || !inside(to) {
                            continue;
                        }
                        let d_out = Vec2::new(ox as f64, oy as f64);
                        let p1 = c + d_out * SETBACK + right(d_out) * LANE_OFFSET;
                        let (centerline, speed) = if (ox, oy) == (dx, dy) {
                            (vec![p0, p1], STRAIGHT_SPEED)
                        } else {
                            let center = c - d_in * SETBACK + d_out * SETBACK;
                            let r = p0.dist(center);
                            let a0 = (p0.y - center.y).atan2(p0.x - center.x);
                            let a1 = (p1.y - center.y).atan2(p1.x - center.x);
                            let sweep = geometry::wrap_angle(a1 - a0);
                            let mut pts: Vec<Vec2> = (0..=ARC_SUBDIVISIONS)
                                .map(|k| {
                                    let a = a0 + sweep * k as f64 / ARC_SUBDIVISIONS as f64;
                                    center + Vec2::from_angle(a) * r
                                })
                                .collect();
                            pts[0] = p0;
                            pts[ARC_SUBDIVISIONS] = p1;
                            (pts, TURN_SPEED)
                        };
                        let id = connector_id(node, din, dout);
                        members.push(id.clone());
                        lanes.push(Lane::new(id, centerline, vec![road_id(node, to)], speed));
                    }
                }
                members.sort();
                approaches.sort_by(|a, b| a.lane_id.cmp(&b.lane_id));
                junctions.push(Junction {
                    junction_id: format!("J_{i}{j}"),
                    center: c,
                    radius: SETBACK,
                    members,
                    signalized: degree == 4,
                    approaches,
                });
            }
        }
        // Quantize geometry so the map document round-trips exactly.
        let lanes = lanes
            .into_iter()
            .map(|l| {
                let pts = l
                    .centerline
                    .iter()
                    .map(|p| Vec2::new(canon::quantize(p.x), canon::quantize(p.y)))
                    .collect();
                Lane::new(l.lane_id, pts, l.successors, l.speed_limit)
            })
            .collect();
        RoadNetwork::from_parts(town.to_string(), lanes, junctions).expect("grid town is consistent")
    }
}

mod point {
    use super::Vec2;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(p: &Vec2, s: S) -> Result<S::Ok, S::Error> {
        [p.x, p.y].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec2, D::Error> {
        let [x, y] = <[f64; 2]>::deserialize(d)?;
        Ok(Vec2::new(x, y))
    }
}

mod point_list {
    use super::Vec2;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(pts: &[Vec2], s: S) -> Result<S::Ok, S::Error> {
        pts.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec2>, D::Error> {
        let raw = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(raw.into_iter().map(|[x, y]| Vec2::new(x, y)).collect())
    }
}
