use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unilateral"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn payload(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn unknown_config_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"maneuver": "touchdown", "horizon": 2.0}"#).unwrap();
    let o = cli(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("horizon"));
}

#[test]
fn empty_grid_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["sweep", "optimize"] {
        let o = cli(&[cmd, "--grid", "-0.1:0.1:0", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code(&o), 2, "{cmd}");
    }
    let o = cli(&["sweep", "--maneuver", "hop"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn simulation_error_exits_3() {
    // Without the extra compression, a steep liftoff start needs a pulling
    // foot and is rejected by the simulator.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"maneuver": "liftoff", "params": {"liftoff_compression": 0.0}}"#).unwrap();
    let o = cli(&["simulate", "--config", cfg.to_str().unwrap(), "--theta0", "0.5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_touchdown_starts_airborne() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let o = cli(&["simulate", "--theta0", "0.1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let modes = fs::read_to_string(out.join("modes.csv")).unwrap();
    let rows: Vec<&str> = modes.lines().skip(1).collect();
    let mode = |row: &str| row.rsplit(',').next().unwrap().to_string();
    assert_eq!(mode(rows[0]), "", "{modes}");
    assert!(["1", "2"].contains(&mode(rows[1]).as_str()), "{modes}");
    for f in ["trajectory.csv", "events.jsonl", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn verify_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = cli(&["sweep", "--maneuver", "liftoff", "--grid", "-0.1:0.1:5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&cli(&["verify", out.to_str().unwrap()])), 0);
    let csv = out.join("outcomes_coarse.csv");
    let mut text = fs::read_to_string(&csv).unwrap();
    text.push_str("0,0,0,0,{},ok\n");
    fs::write(&csv, text).unwrap();
    assert_eq!(code(&cli(&["verify", out.to_str().unwrap()])), 3);
    assert_eq!(code(&cli(&["verify", dir.path().join("missing").to_str().unwrap()])), 2);
}

#[test]
fn repeated_optimize_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, jobs) in [(&a, "1"), (&b, "2")] {
        let o = cli(&[
            "optimize", "--maneuver", "touchdown", "--grid", "-0.05:0.05:3", "--seed", "7", "--jobs", jobs, "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (pa, pb) = (payload(&a), payload(&b));
    assert!(pa.iter().any(|(n, _)| n == "value_policy_fine.csv"));
    assert_eq!(pa, pb);
}

#[test]
fn pg_demo_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("pg.json");
    fs::write(&cfg, r#"{"maneuver": "liftoff", "pg": {"theta0s": [0.15], "alphas": [0.01], "samples": 4}}"#).unwrap();
    let out = dir.path().join("pg");
    let o = cli(&["pg-demo", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("pg_report.json")).unwrap()).unwrap();
    assert_eq!(report[0]["trials"].as_array().unwrap().len(), 3);
}
