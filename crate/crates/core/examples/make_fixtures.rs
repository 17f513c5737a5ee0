//! Regenerates the scenario fixtures under data/fixtures:
//! `cargo run --example make_fixtures`.

use roadfuzz::geometry::Vec2;
use roadfuzz::network::{demo_network, RoadNetwork, DEMO_TOWN};
use roadfuzz::scenario::{
    serialize_scenario, validate_scenario, EgoSpec, Location, NpcObstacleSpec, Scenario, VehicleModelCatalog,
};

fn ego(net: &RoadNetwork, id: &str, from: (f64, f64), to: (f64, f64), agent: &str) -> EgoSpec {
    let route = net
        .shortest_route(Vec2::new(from.0, from.1), Vec2::new(to.0, to.1))
        .expect("route exists");
    EgoSpec {
        id: id.into(),
        model: "vehicle.sedan".into(),
        route,
        start_time: 0.0,
        agent_config_ref: agent.into(),
    }
}

fn scenario(id: &str, egos: Vec<EgoSpec>) -> Scenario {
    let mut s = Scenario::seed(id, DEMO_TOWN, egos[0].route.clone());
    s.ego_vehicles = egos;
    s
}

fn main() {
    let net = demo_network();
    let cat = VehicleModelCatalog::builtin();
    let y = "builtin:yielding_agent";
    let n = "builtin:naive_follower";

    // Three egos meet at the unsignalized T-junction J_10 from its three arms.
    let deadlock = scenario(
        "deadlock_3ego",
        vec![
            ego(&net, "ego_0", (60.0, -1.75), (160.0, -1.75), y),
            ego(&net, "ego_1", (140.0, 1.75), (40.0, 1.75), y),
            ego(&net, "ego_2", (98.25, 40.0), (160.0, -1.75), y),
        ],
    );

    // Straight run along row 100 through the signalized J_11 and J_21.
    let corridor = scenario(
        "corridor_seed",
        vec![ego(&net, "ego_0", (20.0, 98.25), (240.0, 98.25), n)],
    );

    // A barrier blocks the ego lane 60 m ahead.
    let mut parked = scenario(
        "blocked_lane",
        vec![ego(&net, "ego_0", (110.0, 198.25), (280.0, 198.25), n)],
    );
    parked.npc_obstacles.push(NpcObstacleSpec {
        id: "barrier_0".into(),
        model: "static.barrier".into(),
        location: Location {
            x: 170.0,
            y: 198.25,
            heading: std::f64::consts::FRAC_PI_2,
        },
    });

    // Two naive egos reach the unsignalized J_13 from crossing arms together.
    let crossing = scenario(
        "two_ego_crossing",
        vec![
            ego(&net, "ego_0", (60.0, 298.25), (160.0, 298.25), n),
            ego(&net, "ego_1", (101.75, 260.0), (40.0, 301.75), n),
        ],
    );

    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data/fixtures");
    std::fs::create_dir_all(dir).expect("fixture dir");
    for s in [deadlock, corridor, parked, crossing] {
        let report = validate_scenario(&s, &net, &cat);
        assert!(report.is_valid(), "{}: {:?}", s.scenario_id, report.findings);
        let path = format!("{dir}/{}.json", s.scenario_id);
        std::fs::write(&path, serialize_scenario(&s)).expect("write fixture");
        println!("wrote {path}");
    }
}
