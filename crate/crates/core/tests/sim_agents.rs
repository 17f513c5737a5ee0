mod common;

use common::{dist, polyline_distance, P};
use roadfuzz::agents::{setup_env, AgentBindings, AgentContext, DefaultAgentFactory};
use roadfuzz::engine::{oracle_collision, oracle_completion, oracle_stuck};
use roadfuzz::geometry::Vec2;
use roadfuzz::network::demo_network;
use roadfuzz::scenario::{NpcVehicleSpec, Route, Scenario, VehicleModelCatalog, WeatherSpec};
use roadfuzz::sim::{run_scenario, serialize_trace, ActorKind, RunControl, SimConfig, Termination, Trace};

fn run(s: &Scenario, agent: &str, cfg: &SimConfig) -> Trace {
    run_scenario(
        s,
        &DefaultAgentFactory::default(),
        &AgentBindings::wildcard(agent),
        &demo_network(),
        &VehicleModelCatalog::builtin(),
        cfg,
        &RunControl::default(),
    )
}

fn straight(from: f64, to: f64) -> Scenario {
    let net = demo_network();
    let r = net
        .shortest_route(Vec2::new(from, 98.25), Vec2::new(to, 98.25))
        .unwrap();
    Scenario::seed("straight", &net.town, r)
}

fn npc(id: &str, pts: &[(f64, f64)], speed: f64, start: f64) -> NpcVehicleSpec {
    NpcVehicleSpec {
        id: id.into(),
        model: "vehicle.sedan".into(),
        route: Route::from_points(pts, speed),
        start_time: start,
    }
}

#[test]
fn safe_follower_completes_empty_straight() {
    let s = straight(20.0, 80.0);
    let len = common::polyline_length(&common::route_points(&s, 0));
    assert!((len - 60.0).abs() <= 2.0);
    let t = run(&s, "builtin:safe_follower", &SimConfig::default());
    assert_eq!(t.termination(), Termination::AllRoutesCompleted);
    assert!(!oracle_collision(&t).violated);
    let goal: P = (80.0, 98.25);
    let e = &t.last().egos[0];
    assert!(dist((e.x, e.y), goal) <= 2.0);
}

#[test]
fn naive_follower_hits_parked_npc() {
    let mut s = straight(20.0, 85.0);
    s.npc_vehicles
        .push(npc("parked", &[(60.0, 98.25), (62.0, 98.25)], 0.0, 0.0));
    let t = run(&s, "builtin:naive_follower", &SimConfig::default());
    assert_eq!(t.termination(), Termination::Collision);
    let v = oracle_collision(&t);
    let actors = v.detail.unwrap().actors;
    assert!(actors.contains(&"ego_0".to_string()) && actors.contains(&"parked".to_string()));
    // The safe follower stops short of it instead.
    let safe = run(
        &s,
        "builtin:safe_follower",
        &SimConfig {
            max_sim_time: 30.0,
            ..Default::default()
        },
    );
    assert!(!common::brute_collision(&safe));
}

#[test]
fn single_step_budget() {
    let cfg = SimConfig {
        max_sim_time: 0.05,
        ..Default::default()
    };
    let t = run(&straight(20.0, 80.0), "builtin:safe_follower", &cfg);
    assert_eq!(t.termination(), Termination::MaxTimeReached);
    assert_eq!(t.last().step, 1);
}

#[test]
fn traces_are_deterministic_and_well_formed() {
    let cat = VehicleModelCatalog::builtin();
    let mut s = straight(20.0, 85.0);
    s.npc_vehicles
        .push(npc("late", &[(10.0, 101.75), (2.0, 101.75)], 5.0, 3.0));
    s.npc_vehicles
        .push(npc("ahead", &[(40.0, 98.25), (80.0, 98.25)], 4.0, 0.0));
    for name in ["deadlock_3ego", "two_ego_crossing", "blocked_lane"] {
        for scenario in [common::fixture(name), s.clone()] {
            let cfg = SimConfig {
                max_sim_time: 40.0,
                ..Default::default()
            };
            let a = run(&scenario, "builtin:safe_follower", &cfg);
            let b = run(&scenario, "builtin:safe_follower", &cfg);
            assert_eq!(serialize_trace(&a), serialize_trace(&b));

            let ids: Vec<String> = a.observations[0]
                .egos
                .iter()
                .chain(&a.observations[0].other_actors)
                .map(|x| x.id.clone())
                .collect();
            let mut first_pose = std::collections::BTreeMap::new();
            for (i, o) in a.observations.iter().enumerate() {
                if i > 0 {
                    assert!(o.step > a.observations[i - 1].step);
                }
                assert!((o.timestamp - o.step as f64 * cfg.dt).abs() < 1e-9);
                let here: Vec<&str> = o.egos.iter().chain(&o.other_actors).map(|x| x.id.as_str()).collect();
                for id in &ids {
                    assert!(here.contains(&id.as_str()), "{id} missing at step {}", o.step);
                }
                for x in o.egos.iter().chain(&o.other_actors) {
                    if x.kind == ActorKind::TrafficLight {
                        continue;
                    }
                    assert!(x.speed >= 0.0);
                    let model = scenario
                        .actor_ids()
                        .position(|id| id == x.id)
                        .map(|_| model_of(&scenario, &x.id));
                    if let Some(Some(m)) = model {
                        assert!(x.speed <= cat.get(&m).unwrap().max_speed + 1e-9);
                    }
                    if !x.active {
                        let p0 = first_pose.entry(x.id.clone()).or_insert((x.x, x.y, x.heading));
                        assert_eq!(*p0, (x.x, x.y, x.heading), "{} moved while inactive", x.id);
                    }
                }
            }
        }
    }
}

fn model_of(s: &Scenario, id: &str) -> Option<String> {
    s.ego_vehicles
        .iter()
        .map(|e| (&e.id, &e.model))
        .chain(s.npc_vehicles.iter().map(|n| (&n.id, &n.model)))
        .find(|(i, _)| i.as_str() == id)
        .map(|(_, m)| m.clone())
}

#[test]
fn npc_tracks_straight_lane() {
    let mut s = straight(20.0, 85.0);
    s.ego_vehicles[0].route = demo_network()
        .shortest_route(Vec2::new(20.0, 201.75), Vec2::new(2.0, 201.75))
        .unwrap();
    let path = [(10.0, -1.75), (85.0, -1.75)];
    s.npc_vehicles.push(npc("runner", &path, 8.0, 0.0));
    let t = run(
        &s,
        "builtin:safe_follower",
        &SimConfig {
            max_sim_time: 30.0,
            ..Default::default()
        },
    );
    let mut worst = 0.0f64;
    for o in &t.observations {
        let n = o.other_actors.iter().find(|a| a.id == "runner").unwrap();
        if n.x < 80.0 {
            worst = worst.max(polyline_distance((n.x, n.y), &path));
        }
    }
    assert!(worst < 0.3, "cross-track {worst}");
    let end = t.last().other_actors.iter().find(|a| a.id == "runner").unwrap().clone();
    assert!(end.speed < 1e-9, "NPC still moving at route end");
}

#[test]
fn stuck_and_completion_oracles() {
    let deadlock = common::fixture("deadlock_3ego");
    // Shorter than the stuck window: no evidence, but the goal was missed.
    let short = run(
        &deadlock,
        "builtin:yielding_agent",
        &SimConfig {
            max_sim_time: 20.0,
            ..Default::default()
        },
    );
    assert_eq!(short.termination(), Termination::MaxTimeReached);
    assert!(!oracle_stuck(&short, 0.1, 30.0).violated);
    assert!(oracle_completion(&short).violated);

    let long = run(&deadlock, "builtin:yielding_agent", &SimConfig::default());
    let stuck = oracle_stuck(&long, 0.1, 30.0);
    assert!(stuck.violated);
    assert_eq!(stuck.detail.unwrap().actors.len(), 3);

    let crash = run(
        &common::fixture("two_ego_crossing"),
        "builtin:naive_follower",
        &SimConfig::default(),
    );
    assert_eq!(crash.termination(), Termination::Collision);
    assert!(!oracle_completion(&crash).violated);
    let c = oracle_collision(&crash).detail.unwrap();
    assert!(
        c.actors.iter().filter(|a| a.starts_with("ego")).count() == 2,
        "{:?}",
        c.actors
    );

    let done = run(&straight(20.0, 80.0), "builtin:safe_follower", &SimConfig::default());
    assert!(!oracle_completion(&done).violated);
    assert!(!oracle_stuck(&done, 0.1, 30.0).violated);
}

#[test]
fn external_agent_handshake_and_errors() {
    let s = common::fixture("corridor_seed");
    let ego = &s.ego_vehicles[0];
    let ctx = AgentContext {
        ego_id: ego.id.clone(),
        route: ego.route.clone(),
        vehicle_limits: *VehicleModelCatalog::builtin().get(&ego.model).unwrap(),
        weather: WeatherSpec::default(),
        dt: 0.05,
        sensing_radius: 50.0,
    };
    let stub = env!("CARGO_BIN_EXE_roadfuzz-stub-agent");
    assert!(setup_env(&format!("external:{stub} --agent builtin:safe_follower"), &ctx).is_ok());
    assert!(setup_env(&format!("external:{stub} --mode silent"), &ctx).is_err());
    assert!(setup_env("builtin:nosuch", &ctx).is_err());
    assert!(setup_env("external:/nonexistent/agent-binary", &ctx).is_err());
}
