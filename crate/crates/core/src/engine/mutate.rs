use rand::distr::weighted::WeightedIndex;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::MutationConfig;
use crate::geometry::Vec2;
use crate::network::{LanePoint, RoadNetwork, MAX_SNAP_DISTANCE};
use crate::scenario::{validate_scenario, ModelClass, NpcVehicleSpec, Route, Scenario, VehicleModelCatalog};

/// The six mutation operators, in weight order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationOp {
    AddNpc = 0,
    RemoveNpc = 1,
    PerturbRoute = 2,
    PerturbStart = 3,
    PerturbWeather = 4,
    PerturbLight = 5,
}

const OPS: [MutationOp; 6] = [
    MutationOp::AddNpc,
    MutationOp::RemoveNpc,
    MutationOp::PerturbRoute,
    MutationOp::PerturbStart,
    MutationOp::PerturbWeather,
    MutationOp::PerturbLight,
];

fn gauss<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    Normal::new(0.0, sigma).expect("valid sigma").sample(rng)
}

/// Apply one weighted operator to `parent`. Each draw that fails or yields an
/// invalid scenario is retried, up to `cfg.max_attempts` draws; after that
/// the parent is returned unchanged. Ego routes are never touched.
pub fn mutate<R: Rng + ?Sized>(
    parent: &Scenario,
    cfg: &MutationConfig,
    net: &RoadNetwork,
    catalog: &VehicleModelCatalog,
    rng: &mut R,
) -> Scenario {
    let weights = WeightedIndex::new(cfg.weights.as_array()).expect("weights checked by TesterConfig");
    for _ in 0..cfg.max_attempts {
        let op = OPS[weights.sample(rng)];
        let Some(child) = apply(op, parent, cfg, net, catalog, rng) else {
            continue;
        };
        let child = child.normalized();
        if validate_scenario(&child, net, catalog).is_valid() {
            return child;
        }
    }
    parent.clone()
}

fn apply<R: Rng + ?Sized>(
    op: MutationOp,
    parent: &Scenario,
    cfg: &MutationConfig,
    net: &RoadNetwork,
    catalog: &VehicleModelCatalog,
    rng: &mut R,
) -> Option<Scenario> {
    let mut s = parent.clone();
    match op {
        MutationOp::AddNpc => {
            if s.npc_vehicles.len() >= cfg.max_npc_vehicles {
                return None;
            }
            let npc = new_npc(&s, cfg, net, catalog, rng)?;
            s.npc_vehicles.push(npc);
        }
        MutationOp::RemoveNpc => {
            let (v, w, o) = (s.npc_vehicles.len(), s.npc_walkers.len(), s.npc_obstacles.len());
            let total = v + w + o;
            if total == 0 {
                return None;
            }
            let k = rng.random_range(0..total);
            if k < v {
                s.npc_vehicles.remove(k);
            } else if k < v + w {
                s.npc_walkers.remove(k - v);
            } else {
                s.npc_obstacles.remove(k - v - w);
            }
        }
        MutationOp::PerturbRoute => {
            if s.npc_vehicles.is_empty() {
                return None;
            }
            let i = rng.random_range(0..s.npc_vehicles.len());
            // 0: speeds, 1: endpoint, 2: both.
            let which = rng.random_range(0..3);
            let npc = &mut s.npc_vehicles[i];
            if which != 0 {
                npc.route = reroute(&npc.route, cfg, net, rng)?;
            }
            if which != 1 {
                for w in &mut npc.route.waypoints {
                    w.target_speed = (w.target_speed + gauss(rng, cfg.speed_sigma)).max(0.0);
                }
            }
        }
        MutationOp::PerturbStart => {
            let n = s.npc_vehicles.len() + s.npc_walkers.len();
            if n == 0 {
                return None;
            }
            let k = rng.random_range(0..n);
            let t = if k < s.npc_vehicles.len() {
                &mut s.npc_vehicles[k].start_time
            } else {
                &mut s.npc_walkers[k - s.npc_vehicles.len()].start_time
            };
            *t = (*t + gauss(rng, cfg.start_sigma)).max(0.0);
        }
        MutationOp::PerturbWeather => {
            let ranges = s.weather.fields().map(|f| f.2);
            for (i, (lo, hi)) in ranges.into_iter().enumerate() {
                let v = s.weather.field_mut(i);
                *v = (*v + gauss(rng, cfg.weather_sigma)).clamp(lo, hi);
            }
        }
        MutationOp::PerturbLight => {
            let l = &mut s.traffic_lights;
            let t = match rng.random_range(0..3) {
                0 => &mut l.green_time,
                1 => &mut l.yellow_time,
                _ => &mut l.red_time,
            };
            *t = (*t + gauss(rng, cfg.light_sigma)).max(1.0);
        }
    }
    Some(s)
}

/// Walk `dist` metres along the lane graph from `from`, choosing uniformly
/// among successors (forward) or predecessors (backward). Stops early at a
/// dead end.
fn walk<R: Rng + ?Sized>(net: &RoadNetwork, from: &LanePoint, dist: f64, forward: bool, rng: &mut R) -> LanePoint {
    let mut lane = net.lane(&from.lane_id).expect("lane exists");
    let mut arc = from.arc;
    let mut left = dist;
    loop {
        if forward {
            if arc + left <= lane.length() {
                arc += left;
                break;
            }
            left -= lane.length() - arc;
            let Some(next) = lane.successors.choose(rng) else {
                arc = lane.length();
                break;
            };
            lane = net.lane(next).expect("successor exists");
            arc = 0.0;
        } else {
            if arc - left >= 0.0 {
                arc -= left;
                break;
            }
            left -= arc;
            let Some(prev) = net.predecessors(&lane.lane_id).choose(rng) else {
                arc = 0.0;
                break;
            };
            lane = net.lane(prev).expect("predecessor exists");
            arc = lane.length();
        }
    }
    LanePoint {
        lane_id: lane.lane_id.clone(),
        arc,
        lateral: 0.0,
    }
}

fn scale_speeds<R: Rng + ?Sized>(route: &mut Route, cfg: &MutationConfig, rng: &mut R) {
    let (lo, hi) = cfg.npc_speed_factor;
    let f = rng.random_range(lo..=hi);
    for w in &mut route.waypoints {
        w.target_speed *= f;
    }
}

/// NPC vehicle on a lane near a random ego waypoint: the route passes that
/// lane, extends backward and forward along the graph, and is 20-100 m long.
fn new_npc<R: Rng + ?Sized>(
    s: &Scenario,
    cfg: &MutationConfig,
    net: &RoadNetwork,
    catalog: &VehicleModelCatalog,
    rng: &mut R,
) -> Option<NpcVehicleSpec> {
    let ego = s.ego_vehicles.choose(rng)?;
    let anchor = ego.route.waypoints.choose(rng)?.position();
    let near = net.lanes_near(anchor, cfg.corridor_radius);
    let pick = near.choose(rng)?;
    let length = rng.random_range(cfg.npc_route_min..=cfg.npc_route_max);
    let back = rng.random_range(0.0..=length);
    let start = walk(net, pick, back, false, rng);
    let end = walk(net, pick, length - back, true, rng);
    let mut route = net.route_between(&start, &end).ok()?;
    let len = route.length();
    if len < cfg.npc_route_min || len > cfg.npc_route_max {
        return None;
    }
    scale_speeds(&mut route, cfg, rng);
    let models = catalog.keys_of(ModelClass::Vehicle);
    let model = models.choose(rng)?.to_string();
    let mut n = s.npc_vehicles.len();
    let id = loop {
        let id = format!("npc_v{n}");
        if s.actor_ids().all(|a| a != id) {
            break id;
        }
        n += 1;
    };
    Some(NpcVehicleSpec {
        id,
        model,
        route,
        start_time: rng.random_range(0.0..=cfg.npc_start_max),
    })
}

/// Move one endpoint of `route` to a lane point within the reroute radius
/// and re-plan the route between the endpoints.
fn reroute<R: Rng + ?Sized>(route: &Route, cfg: &MutationConfig, net: &RoadNetwork, rng: &mut R) -> Option<Route> {
    let move_start = rng.random_bool(0.5);
    let anchor = if move_start { route.first() } else { route.last() }.position();
    let r = cfg.reroute_radius * rng.random::<f64>().sqrt();
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    let target = anchor + Vec2::from_angle(theta) * r;
    let lp = net.nearest_lane_point(target);
    let lane = net.lane(&lp.lane_id)?;
    let snapped = lane.point_at(lp.arc).0;
    if snapped.dist(target) > MAX_SNAP_DISTANCE || snapped.dist(anchor) > cfg.reroute_radius {
        return None;
    }
    let moved = LanePoint { lateral: 0.0, ..lp };
    let (a, b) = if move_start {
        (moved, net.nearest_lane_point(route.last().position()))
    } else {
        (net.nearest_lane_point(route.first().position()), moved)
    };
    let mut out = net.route_between(&a, &b).ok()?;
    if out.length() < cfg.npc_route_min || out.length() > cfg.npc_route_max * 1.5 {
        return None;
    }
    scale_speeds(&mut out, cfg, rng);
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::demo_network;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seed() -> (RoadNetwork, Scenario) {
        let net = demo_network();
        let s = net.generate_seed_scenarios(1, 100.0, 200.0, 3).unwrap().remove(0);
        (net, s)
    }

    #[test]
    fn weather_only_touches_weather() {
        let (net, s) = seed();
        let cat = VehicleModelCatalog::builtin();
        let cfg = MutationConfig {
            weights: super::super::MutationWeights::only(MutationOp::PerturbWeather),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let m = mutate(&s, &cfg, &net, &cat, &mut rng);
            let mut same = m.clone();
            same.weather = s.weather;
            assert_eq!(same, s.normalized());
            for (_, v, (lo, hi)) in m.weather.fields() {
                assert!(v >= lo && v <= hi);
            }
        }
    }

    #[test]
    fn remove_from_empty_returns_parent() {
        let (net, s) = seed();
        let cfg = MutationConfig {
            weights: super::super::MutationWeights::only(MutationOp::RemoveNpc),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(mutate(&s, &cfg, &net, &VehicleModelCatalog::builtin(), &mut rng), s);
    }

    #[test]
    fn added_npcs_are_near_the_ego() {
        let (net, s) = seed();
        let cat = VehicleModelCatalog::builtin();
        let cfg = MutationConfig {
            weights: super::super::MutationWeights::only(MutationOp::AddNpc),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ego_pts = s.ego_vehicles[0].route.points();
        for _ in 0..20 {
            let m = mutate(&s, &cfg, &net, &cat, &mut rng);
            assert_eq!(m.npc_vehicles.len(), 1);
            let npc = &m.npc_vehicles[0];
            let len = npc.route.length();
            assert!((20.0..=100.0).contains(&len), "{len}");
            let closest = npc
                .route
                .points()
                .iter()
                .flat_map(|p| ego_pts.iter().map(move |q| p.dist(*q)))
                .fold(f64::INFINITY, f64::min);
            assert!(closest <= cfg.corridor_radius + 2.0, "{closest}");
            assert_eq!(m.ego_vehicles, s.ego_vehicles);
        }
    }
}
