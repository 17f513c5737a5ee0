mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use roadfuzz::cli::{cmd_replay, cmd_report, load_run_config, select_frames};
use roadfuzz::engine::{OracleKind, RunReport};
use roadfuzz::sim::{parse_trace, Termination};

fn roadfuzz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roadfuzz"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let text = format!(
        "output_root = {:?}\nscenario = {:?}\n{body}",
        dir.join("runs").display().to_string(),
        common::fixture_path("corridor_seed.json").display().to_string(),
    );
    let path = dir.join(format!("{name}.toml"));
    std::fs::write(&path, text).unwrap();
    path
}

const SMALL: &str = "\n[tester]\nkind = \"genetic\"\npopulation_size = 4\ngenerations = 3\nrng_seed = 1\n\n[tester.mutation.weights]\nadd_npc = 6.0\n\n[agent]\n\"*\" = \"builtin:naive_follower\"\n\n[sim]\nmax_sim_time = 30.0\n\n[pool]\nworkers = 2\n";

fn dirs_with_prefix(dir: &Path, prefix: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .flatten()
        .filter(|e| e.file_name().to_string_lossy().starts_with(prefix) && e.path().is_dir())
        .map(|e| e.path())
        .collect();
    v.sort();
    v
}

fn run_dir_from(out: &Output, root: &Path) -> PathBuf {
    assert!(out.status.success(), "run failed: {}", text(&out.stderr));
    let dirs = dirs_with_prefix(&root.join("runs"), "");
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs[0].clone()
}

#[test]
fn seed_generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = roadfuzz(&[
            "seed-generate",
            "--num",
            "6",
            "--town",
            "Town01-lite",
            "--min-length",
            "50",
            "--max-length",
            "200",
            "--seed",
            "42",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", text(&o.stderr));
        assert_eq!(text(&o.stdout).lines().count(), 6);
    }
    let names: Vec<_> = std::fs::read_dir(&a)
        .unwrap()
        .flatten()
        .map(|e| e.file_name())
        .collect();
    assert_eq!(names.len(), 6);
    for n in names {
        assert_eq!(std::fs::read(a.join(&n)).unwrap(), std::fs::read(b.join(&n)).unwrap());
    }
}

#[test]
fn unknown_town_lists_available() {
    let dir = tempfile::tempdir().unwrap();
    let o = roadfuzz(&[
        "seed-generate",
        "--num",
        "1",
        "--town",
        "Atlantis",
        "--min-length",
        "50",
        "--max-length",
        "200",
        "--seed",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    let err = text(&o.stderr);
    assert!(err.contains("Atlantis") && err.contains("Town01-lite"), "{err}");
}

#[test]
fn bad_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad", "\n[tester]\npopulation = 4\n");
    let o = roadfuzz(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o.stderr));
    assert!(text(&o.stderr).contains("population"));
    let missing = roadfuzz(&["run", "--config", dir.path().join("nope.toml").to_str().unwrap()]);
    assert!(!missing.status.success());
}

#[test]
fn bundled_example_config_loads() {
    let cfg = load_run_config(&common::fixture_path("example_config.toml")).unwrap();
    assert_eq!(cfg.tester.population_size, 8);
    assert_eq!(cfg.pool.workers, 2);
    assert!(cfg.scenario.is_file());
}

#[test]
fn run_layout_report_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small", SMALL);
    let o = roadfuzz(&["run", "--config", cfg.to_str().unwrap()]);
    let run = run_dir_from(&o, dir.path());
    let stdout = text(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.contains("best")).count(), 3, "{stdout}");

    // Layout.
    for f in [
        "config_snapshot.toml",
        "report.json",
        "generations.csv",
        "logs/engine.log",
    ] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    assert_eq!(std::fs::read_dir(run.join("seeds")).unwrap().count(), 1);
    let report: RunReport = serde_json::from_str(&std::fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    let mut folders = 0;
    for g in dirs_with_prefix(&run, "gen_") {
        for ind in dirs_with_prefix(&g, "ind_") {
            for f in ["scenario.json", "trace.json", "verdicts.json", "fitness.json"] {
                assert!(ind.join(f).is_file(), "{} lacks {f}", ind.display());
            }
            folders += 1;
        }
    }
    assert_eq!(folders, report.executions());
    for e in &report.evaluations {
        assert!(run.join(&e.trace_ref).is_file());
    }
    let csv = std::fs::read_to_string(run.join("generations.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3);

    // Report.
    let sum = cmd_report(&run).unwrap();
    assert!(sum.warnings.is_empty(), "{:?}", sum.warnings);
    assert_eq!(sum.rows.len(), report.executions());
    let collided = report
        .evaluations
        .iter()
        .filter(|e| e.verdict(OracleKind::Collision).is_some_and(|v| v.violated))
        .count();
    assert_eq!(
        sum.violations.get(&OracleKind::Collision).copied().unwrap_or(0),
        collided
    );
    assert_eq!(sum.best_so_far, report.best_so_far());
    let table = std::fs::read_to_string(&sum.table_path).unwrap();
    assert_eq!(table.lines().count(), 1 + report.executions());
    for row in &sum.rows {
        assert!(run.join(&row.trace_path).is_file());
    }
    let cli = roadfuzz(&["report", "--run-dir", run.to_str().unwrap()]);
    assert!(cli.status.success());

    // A damaged directory still reports, with warnings.
    let victim = run.join(&report.evaluations[0].trace_ref);
    std::fs::remove_file(&victim).unwrap();
    let partial = cmd_report(&run).unwrap();
    assert!(!partial.warnings.is_empty());

    // Replay with a stride longer than the trace.
    let t = run.join(&report.evaluations[1].trace_ref);
    let frames = dir.path().join("frames");
    let o = roadfuzz(&[
        "replay",
        "--trace",
        t.to_str().unwrap(),
        "--out",
        frames.to_str().unwrap(),
        "--stride",
        "1000000",
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let mut names: Vec<String> = std::fs::read_dir(&frames)
        .unwrap()
        .flatten()
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names.iter().filter(|n| n.starts_with("frame_")).count(), 2, "{names:?}");
    assert!(names.contains(&"summary.svg".to_string()));
}

#[test]
fn snapshot_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "snap", SMALL);
    let first = roadfuzz::cli::cmd_run(&cfg, false).unwrap();
    let second = roadfuzz::cli::cmd_run(&first.run_dir.join("config_snapshot.toml"), false).unwrap();
    assert_ne!(first.run_dir, second.run_dir);
    assert_eq!(
        std::fs::read(first.run_dir.join("report.json")).unwrap(),
        std::fs::read(second.run_dir.join("report.json")).unwrap()
    );
}

#[test]
fn random_single_generation_gives_one_folder() {
    let dir = tempfile::tempdir().unwrap();
    let body = "\n[tester]\nkind = \"random\"\npopulation_size = 3\ngenerations = 1\n\n[sim]\nmax_sim_time = 20.0\n\n[pool]\nworkers = 1\n";
    let cfg = write_config(dir.path(), "rand", body);
    let o = roadfuzz(&["run", "--config", cfg.to_str().unwrap()]);
    let run = run_dir_from(&o, dir.path());
    let gens = dirs_with_prefix(&run, "gen_");
    assert_eq!(gens.len(), 1);
    assert_eq!(dirs_with_prefix(&gens[0], "ind_").len(), 3);
}

#[test]
fn zero_violation_run_counts_nothing() {
    let dir = tempfile::tempdir().unwrap();
    // Weather-only mutations on an empty road: nothing to hit, nothing to block.
    let body = "\n[tester]\npopulation_size = 3\ngenerations = 2\n\n[tester.mutation.weights]\nadd_npc = 0.0\nremove_npc = 0.0\nperturb_route = 0.0\nperturb_start = 0.0\nperturb_weather = 1.0\nperturb_light = 0.0\n\n[agent]\n\"*\" = \"builtin:safe_follower\"\n";
    let cfg = write_config(dir.path(), "calm", body);
    let run = roadfuzz::cli::cmd_run(&cfg, false).unwrap();
    let sum = cmd_report(&run.run_dir).unwrap();
    assert!(sum.violations.values().all(|&n| n == 0), "{:?}", sum.violations);
    assert!(run.report.violating.is_empty());
}

#[test]
fn deadlock_replay_ends_with_three_stationary_egos() {
    let dir = tempfile::tempdir().unwrap();
    let s = common::fixture("deadlock_3ego");
    let trace = roadfuzz::sim::run_scenario(
        &s,
        &roadfuzz::agents::DefaultAgentFactory::default(),
        &Default::default(),
        &roadfuzz::network::demo_network(),
        &roadfuzz::scenario::VehicleModelCatalog::builtin(),
        &Default::default(),
        &Default::default(),
    );
    assert_eq!(trace.termination(), Termination::MaxTimeReached);
    let path = dir.path().join("deadlock.json");
    std::fs::write(&path, roadfuzz::sim::serialize_trace(&trace)).unwrap();
    let parsed = parse_trace(&std::fs::read_to_string(&path).unwrap()).unwrap();

    let last = parsed.last();
    assert_eq!(last.egos.len(), 3);
    for e in &last.egos {
        assert!(e.speed < 0.1, "{} moving at {}", e.id, e.speed);
        // All three wait around the T-junction at (100, 0).
        assert!(
            common::dist((e.x, e.y), (100.0, 0.0)) < 25.0,
            "{} at ({}, {})",
            e.id,
            e.x,
            e.y
        );
    }

    let files = cmd_replay(&path, &dir.path().join("frames"), 200).unwrap();
    assert_eq!(files.len(), select_frames(&parsed, 200).len() + 1);
    let final_frame = std::fs::read_to_string(&files[files.len() - 2]).unwrap();
    assert!(final_frame.starts_with("<svg") || final_frame.starts_with("<?xml"));
    assert_eq!(final_frame.matches("fill=\"#1f5fbf\"").count(), 3);
}

#[test]
fn collision_replay_shows_overlap_and_marker() {
    let dir = tempfile::tempdir().unwrap();
    let s = common::fixture("blocked_lane");
    let trace = roadfuzz::sim::run_scenario(
        &s,
        &roadfuzz::agents::DefaultAgentFactory::default(),
        &roadfuzz::agents::AgentBindings::wildcard("builtin:naive_follower"),
        &roadfuzz::network::demo_network(),
        &roadfuzz::scenario::VehicleModelCatalog::builtin(),
        &Default::default(),
        &Default::default(),
    );
    assert_eq!(trace.termination(), Termination::Collision);
    assert!(common::brute_collision(&trace));
    let path = dir.path().join("hit.json");
    std::fs::write(&path, roadfuzz::sim::serialize_trace(&trace)).unwrap();
    let files = cmd_replay(&path, &dir.path().join("frames"), 50).unwrap();
    let last = std::fs::read_to_string(&files[files.len() - 2]).unwrap();
    assert!(last.contains("barrier_0") && last.contains("ego_0"));
    let summary = std::fs::read_to_string(files.last().unwrap()).unwrap();
    assert!(summary.contains("collision"));
}
