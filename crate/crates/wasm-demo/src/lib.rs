//! Browser bindings. Every export takes plain numbers and returns a JSON
//! string, or throws the error message.

use serde::Serialize;
use unilateral::biped::{biped_system, initial_state, termination, Maneuver, PolicyInputs};
use unilateral::flow::{flow, EventKind, FlowConfig};
use unilateral::grid::GridSpec;
use unilateral::optimizer::Problem;
use unilateral::regularity::{classify_curve, PointClass, Thresholds};
use wasm_bindgen::prelude::*;

const MAX_POINTS: usize = 2001;

#[derive(Serialize)]
struct TrajectoryView {
    t: Vec<f64>,
    z: Vec<f64>,
    theta: Vec<f64>,
    foot1: Vec<f64>,
    foot2: Vec<f64>,
    mode: Vec<String>,
    events: Vec<(f64, String)>,
    terminated_by: Option<String>,
}

#[derive(Serialize)]
struct SweepView {
    theta0: Vec<f64>,
    theta_terminal: Vec<Option<f64>>,
    cost: Vec<Option<f64>>,
    mode_sequence: Vec<String>,
}

#[derive(Serialize)]
struct ClassView {
    theta0: Vec<f64>,
    class: Vec<&'static str>,
    irregular: Vec<(f64, &'static str)>,
}

fn maneuver(name: &str) -> Result<Maneuver, String> {
    name.parse().map_err(|e: unilateral::Error| e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// One maneuver from pitch `theta0` under constant inputs.
pub fn simulate_json(kind: &str, theta0: f64, u1: f64, u2: f64, u12: f64) -> Result<String, String> {
    let kind = maneuver(kind)?;
    let pb = Problem::with_defaults(kind);
    let biped = biped_system(&pb.params).map_err(|e| e.to_string())?;
    let x0 = initial_state(kind, theta0, &pb.params).map_err(|e| e.to_string())?;
    let u = PolicyInputs::new(u1, u2, u12);
    let term = termination(kind);
    let traj = flow(&biped, &x0, |_| u, &FlowConfig::default(), std::slice::from_ref(&term)).map_err(|e| e.to_string())?;
    let col = |k: usize| traj.samples.iter().map(|s| s.q[k]).collect::<Vec<_>>();
    let events = traj
        .events
        .iter()
        .map(|e| {
            let label = match &e.kind {
                EventKind::Activation(j) => format!("contact {}", j + 1),
                EventKind::Deactivation(j) => format!("release {}", j + 1),
                EventKind::Grazing(j) => format!("graze {}", j + 1),
                EventKind::Termination(n) => n.clone(),
                EventKind::ZenoGuard => "zeno guard".into(),
            };
            (e.time, label)
        })
        .collect();
    to_json(&TrajectoryView {
        t: traj.samples.iter().map(|s| s.t).collect(),
        z: col(0),
        theta: col(1),
        foot1: col(2),
        foot2: col(3),
        mode: traj.samples.iter().map(|s| s.mode.to_string()).collect(),
        events,
        terminated_by: traj.terminated_by.clone(),
    })
}

fn outcome_curve(kind: Maneuver, u: &PolicyInputs, grid: &GridSpec) -> SweepView {
    let pb = Problem::with_defaults(kind);
    let theta0 = grid.points();
    let mut view = SweepView { theta0: theta0.clone(), theta_terminal: vec![], cost: vec![], mode_sequence: vec![] };
    for &x in &theta0 {
        match pb.outcome(x, u) {
            Ok(o) => {
                view.theta_terminal.push(finite(o.theta_terminal));
                view.cost.push(pb.cost(x, u).ok());
                view.mode_sequence.push(o.mode_sequence.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(" → "));
            }
            Err(_) => {
                view.theta_terminal.push(None);
                view.cost.push(None);
                view.mode_sequence.push(String::new());
            }
        }
    }
    view
}

fn checked_grid(lo: f64, hi: f64, count: usize) -> Result<GridSpec, String> {
    if count > MAX_POINTS {
        return Err(format!("at most {MAX_POINTS} points"));
    }
    GridSpec::new(lo, hi, count).map_err(|e| e.to_string())
}

/// Terminal pitch and cost over a grid of initial pitches.
pub fn sweep_json(kind: &str, u1: f64, u2: f64, u12: f64, lo: f64, hi: f64, count: usize) -> Result<String, String> {
    let grid = checked_grid(lo, hi, count)?;
    to_json(&outcome_curve(maneuver(kind)?, &PolicyInputs::new(u1, u2, u12), &grid))
}

/// Classification of the terminal-pitch curve on a grid and its 4× refinement.
pub fn classify_json(kind: &str, u1: f64, u2: f64, u12: f64, lo: f64, hi: f64, count: usize) -> Result<String, String> {
    let grid = checked_grid(lo, hi, count)?;
    let kind = maneuver(kind)?;
    let u = PolicyInputs::new(u1, u2, u12);
    let column = |v: &SweepView| -> Vec<(f64, f64)> {
        v.theta0.iter().zip(&v.theta_terminal).map(|(&x, y)| (x, y.unwrap_or(f64::NAN))).collect()
    };
    let coarse = outcome_curve(kind, &u, &grid);
    let fine = outcome_curve(kind, &u, &grid.refined(4));
    let report = classify_curve(&column(&coarse), &column(&fine), Thresholds::default()).map_err(|e| e.to_string())?;
    to_json(&ClassView {
        theta0: report.points.iter().map(|p| p.x).collect(),
        class: report.points.iter().map(|p| p.class.as_str()).collect(),
        irregular: report
            .points
            .iter()
            .filter(|p| matches!(p.class, PointClass::Kink | PointClass::Jump))
            .map(|p| (p.x, p.class.as_str()))
            .collect(),
    })
}

#[wasm_bindgen]
pub fn simulate(kind: &str, theta0: f64, u1: f64, u2: f64, u12: f64) -> Result<String, JsError> {
    simulate_json(kind, theta0, u1, u2, u12).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sweep(kind: &str, u1: f64, u2: f64, u12: f64, lo: f64, hi: f64, count: usize) -> Result<String, JsError> {
    sweep_json(kind, u1, u2, u12, lo, hi, count).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn classify(kind: &str, u1: f64, u2: f64, u12: f64, lo: f64, hi: f64, count: usize) -> Result<String, JsError> {
    classify_json(kind, u1, u2, u12, lo, hi, count).map_err(|e| JsError::new(&e))
}
