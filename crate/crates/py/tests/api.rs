use roadfuzz_py::api;

fn seed() -> String {
    api::seed_scenarios("Town01-lite", 1, 60.0, 150.0, 3).unwrap().remove(0)
}

#[test]
fn towns_and_map() {
    assert_eq!(api::towns(), vec!["Town01-lite".to_string()]);
    let map: serde_json::Value = serde_json::from_str(&api::map_json("Town01-lite").unwrap()).unwrap();
    assert!(map.get("lanes").is_some());
    assert!(api::map_json("Atlantis").unwrap_err().contains("Town01-lite"));
}

#[test]
fn seeds_validate_and_mutate() {
    let s = seed();
    assert!(api::validate(&s).unwrap().iter().all(|(sev, _, _)| sev != "error"));
    let m = api::mutate_scenario(&s, 7, 5).unwrap();
    assert_eq!(m, api::mutate_scenario(&s, 7, 5).unwrap());
    assert!(api::validate(&m).unwrap().iter().all(|(sev, _, _)| sev != "error"));
    assert!(api::scenario("{}").is_err());
}

#[test]
fn simulate_and_evaluate() {
    let s = seed();
    let sim = r#"{"max_sim_time": 60.0}"#;
    let t = api::simulate(&s, Some("builtin:safe_follower"), Some(sim)).unwrap();
    assert_eq!(t, api::simulate(&s, Some("builtin:safe_follower"), Some(sim)).unwrap());
    let trace = api::trace(&t).unwrap();
    assert_eq!(trace.termination().as_str(), "all_routes_completed");
    let ev: serde_json::Value = serde_json::from_str(&api::evaluate(&t).unwrap()).unwrap();
    assert_eq!(ev["fitness"].as_f64().unwrap(), 50.0);
    assert!(api::sim_config(Some(r#"{"dt": -1}"#)).is_err());
}

#[test]
fn batch_matches_single_runs() {
    let docs = api::seed_scenarios("Town01-lite", 3, 60.0, 150.0, 8).unwrap();
    let sim = r#"{"max_sim_time": 20.0}"#;
    let batch = api::execute_batch(&docs, Some("builtin:naive_follower"), 2, Some(sim)).unwrap();
    for (d, t) in docs.iter().zip(&batch) {
        assert_eq!(t, &api::simulate(d, Some("builtin:naive_follower"), Some(sim)).unwrap());
    }
    assert!(api::execute_batch(&[], None, 2, None).unwrap().is_empty());
}

#[test]
fn replay_writes_frames() {
    let dir = tempfile::tempdir().unwrap();
    let t = api::simulate(&seed(), None, Some(r#"{"max_sim_time": 5.0}"#)).unwrap();
    let path = dir.path().join("t.json");
    std::fs::write(&path, t).unwrap();
    let files = api::replay(
        path.to_str().unwrap(),
        dir.path().join("f").to_str().unwrap(),
        1_000_000,
    )
    .unwrap();
    assert_eq!(files.len(), 3);
}
