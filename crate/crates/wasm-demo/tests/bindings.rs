use serde_json::Value;
use unilateral_wasm_demo::{classify_json, simulate_json, sweep_json};

#[test]
fn simulate_reports_touchdown_modes() {
    let v: Value = serde_json::from_str(&simulate_json("touchdown", 0.1, 0.0, 0.0, 0.0).unwrap()).unwrap();
    assert_eq!(v["terminated_by"], "nadir");
    assert_eq!(v["mode"][0], "{}");
    assert!(v["events"].as_array().unwrap().iter().any(|e| e[1] == "contact 1"));
}

#[test]
fn sweep_has_one_row_per_point() {
    let v: Value = serde_json::from_str(&sweep_json("liftoff", 1.0, 15.0, 0.0, -0.1, 0.1, 5).unwrap()).unwrap();
    assert_eq!(v["theta0"].as_array().unwrap().len(), 5);
    assert_eq!(v["mode_sequence"][0], "{1,2} → {2} → {}");
    assert_eq!(v["mode_sequence"][4], "{1,2} → {1} → {}");
}

#[test]
fn classify_finds_liftoff_jump() {
    let v: Value = serde_json::from_str(&classify_json("liftoff", 1.0, 15.0, 0.0, -0.1, 0.1, 81).unwrap()).unwrap();
    let irregular = v["irregular"].as_array().unwrap();
    assert!(irregular.iter().any(|p| p[0] == 0.0 && p[1] == "jump"), "{irregular:?}");
}

#[test]
fn rejects_bad_arguments() {
    assert!(simulate_json("hop", 0.0, 0.0, 0.0, 0.0).is_err());
    assert!(sweep_json("liftoff", 0.0, 0.0, 0.0, 0.1, -0.1, 5).is_err());
    assert!(sweep_json("liftoff", 0.0, 0.0, 0.0, -0.1, 0.1, 100_000).is_err());
}
