use std::cell::RefCell;

use approx::assert_abs_diff_eq;
use rayon::prelude::*;
use unilateral::biped::{CostParams, Maneuver, PolicyInputs};
use unilateral::optimizer::{brent_min, brent_min_partial, sweep, Problem, RowStatus};
use unilateral::Error;

fn symmetric_touchdown() -> Problem {
    let mut pb = Problem::with_defaults(Maneuver::Touchdown);
    pb.cost = CostParams { theta_desired: 0.0, a1: 1e-3, a2: 1e-3, ..CostParams::default() };
    pb
}

#[test]
fn brent_reference_minimizers() {
    let q = brent_min(|u| Ok((u - 2.0).powi(2)), 0.0, 5.0, 1e-8, 200).unwrap();
    assert!((q.x - 2.0).abs() <= 1e-8, "{q:?}");
    assert!(q.fx <= 1e-16);
    let kink = brent_min(|u: f64| Ok((u - 1.0).abs() + 0.1 * u * u), -5.0, 5.0, 1e-8, 200).unwrap();
    assert!((kink.x - 1.0).abs() <= 1e-8, "{kink:?}");
    let (x, a) = (1.0, 1.0);
    let quad = brent_min(|u| Ok((u - x).powi(2) + a * u * u), -5.0, 5.0, 1e-8, 200).unwrap();
    assert!((quad.x - 0.5).abs() <= 1e-8, "{quad:?}");
    assert!(quad.converged);
}

#[test]
fn brent_finds_the_global_basin_and_dominates_its_probes() {
    let f = |u: f64| (u * u - 4.0).powi(2) + 0.5 * u;
    let probes = RefCell::new(Vec::new());
    let m = brent_min(
        |u| {
            let v = f(u);
            probes.borrow_mut().push(v);
            Ok(v)
        },
        -5.0,
        5.0,
        1e-8,
        200,
    )
    .unwrap();
    assert!(m.x < 0.0, "{m:?}");
    assert!(probes.borrow().iter().all(|&v| m.fx <= v));
    assert_eq!(m.evals, probes.borrow().len());
}

#[test]
fn brent_errors() {
    assert!(matches!(brent_min(|_| Ok(f64::NAN), 0.0, 1.0, 1e-8, 200), Err(Error::NonFiniteCost { .. })));
    assert!(matches!(brent_min(|u| Ok(u), 1.0, 0.0, 1e-8, 200), Err(Error::Config(_))));
    let partial = brent_min_partial(|u| Ok((u > 0.5).then_some((u - 0.7).powi(2))), 0.0, 1.0, 1e-8, 200).unwrap();
    assert!((partial.x - 0.7).abs() <= 1e-8);
    assert!(brent_min_partial(|_| Ok(None), 0.0, 1.0, 1e-8, 200).is_err());
    let capped = brent_min(|u: f64| Ok(u.cos()), 0.0, 6.0, 1e-14, 40).unwrap();
    assert!(!capped.converged);
    assert_eq!(capped.evals, 40);
}

#[test]
fn heavy_penalties_drive_inputs_to_zero() {
    let mut td = Problem::with_defaults(Maneuver::Touchdown);
    td.cost.a1 = 1e5;
    td.cost.a2 = 1e5;
    for theta0 in [-0.1, 0.1] {
        let s = td.optimize(theta0, None).unwrap();
        assert!(s.inputs.u1.abs() <= 1e-6 && s.inputs.u2.abs() <= 1e-6, "{theta0}: {:?}", s.inputs);
    }
    let mut lo = Problem::with_defaults(Maneuver::Liftoff);
    lo.cost.a12 = 1e5;
    let s = lo.optimize(0.1, None).unwrap();
    assert!(s.inputs.u12.abs() <= 1e-6, "{:?}", s.inputs);
}

#[test]
fn unvisited_leg_gets_zero_input() {
    let pb = Problem::with_defaults(Maneuver::Touchdown);
    let right = pb.optimize(0.1, None).unwrap();
    assert_eq!(right.inputs.u2, 0.0);
    assert!(right.inputs.u1 != 0.0);
    let left = pb.optimize(-0.1, None).unwrap();
    assert_eq!(left.inputs.u1, 0.0);
    assert!(left.inputs.u2 != 0.0);
    assert!(right.converged && left.converged);
}

#[test]
fn mirror_symmetric_problem_has_mirrored_optima() {
    let pb = symmetric_touchdown();
    for theta0 in [0.05, 0.12, 0.2] {
        let p = pb.optimize(theta0, None).unwrap();
        let m = pb.optimize(-theta0, None).unwrap();
        assert!((p.inputs.u1 - m.inputs.u2).abs() <= 1e-5, "{theta0}: {:?} {:?}", p.inputs, m.inputs);
        assert!((p.inputs.u2 - m.inputs.u1).abs() <= 1e-5);
        assert!((p.value - m.value).abs() <= 1e-6);
    }
}

#[test]
fn liftoff_target_at_the_free_apex_needs_no_torque() {
    let mut pb = Problem::with_defaults(Maneuver::Liftoff);
    let free = pb.outcome(0.1, &pb.liftoff_inputs(0.0)).unwrap();
    pb.cost.theta_desired = free.theta_terminal;
    let s = pb.optimize(0.1, None).unwrap();
    assert!(s.inputs.u12.abs() <= 1e-6, "{:?}", s.inputs);
    assert!(s.value <= 1e-12);
}

#[test]
fn touchdown_matches_a_201_by_201_grid_oracle() {
    let pb = Problem::with_defaults(Maneuver::Touchdown);
    let theta0 = 0.1;
    let [lo, hi] = pb.optimizer.u1_bounds;
    let pitch = (hi - lo) / 200.0;
    let axis: Vec<f64> = (0..=200).map(|i| lo + pitch * i as f64).collect();
    let best = axis
        .par_iter()
        .flat_map_iter(|&u1| axis.iter().map(move |&u2| (u1, u2)))
        .filter_map(|(u1, u2)| {
            let u = PolicyInputs::new(u1, u2, 0.0);
            pb.cost_if_defined(theta0, &u).unwrap().map(|c| (c, u1, u2))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    let s = pb.optimize(theta0, None).unwrap();
    assert!(s.value <= best.0 + 1e-8, "solver {} oracle {}", s.value, best.0);
    assert!((s.inputs.u1 - best.1).abs() <= pitch, "{:?} vs {best:?}", s.inputs);
    assert!((s.inputs.u2 - best.2).abs() <= pitch);
}

#[test]
fn liftoff_matches_a_2001_point_grid_oracle() {
    let pb = Problem::with_defaults(Maneuver::Liftoff);
    let theta0 = 0.1;
    let [lo, hi] = pb.optimizer.u12_bounds;
    let pitch = (hi - lo) / 2000.0;
    let best = (0..=2000)
        .into_par_iter()
        .filter_map(|i| {
            let u12 = lo + pitch * i as f64;
            pb.cost_if_defined(theta0, &pb.liftoff_inputs(u12)).unwrap().map(|c| (c, u12))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    let s = pb.optimize(theta0, None).unwrap();
    assert!(s.value <= best.0 + 1e-8, "solver {} oracle {}", s.value, best.0);
    assert!((s.inputs.u12 - best.1).abs() <= pitch, "{:?} vs {best:?}", s.inputs);
}

#[test]
fn solver_value_dominates_every_probe() {
    let pb = Problem::with_defaults(Maneuver::Liftoff);
    let probes = RefCell::new(Vec::new());
    let [lo, hi] = pb.optimizer.u12_bounds;
    let m = brent_min_partial(
        |x| {
            let c = pb.cost_if_defined(-0.07, &pb.liftoff_inputs(x))?;
            probes.borrow_mut().extend(c);
            Ok(c)
        },
        lo,
        hi,
        pb.optimizer.tol,
        pb.optimizer.max_evals,
    )
    .unwrap();
    assert!(probes.borrow().iter().all(|&c| m.fx <= c));
    assert_eq!(pb.optimize(-0.07, None).unwrap().value, m.fx);
}

#[test]
fn sweep_rows_reproduce_their_value() {
    for kind in [Maneuver::Touchdown, Maneuver::Liftoff] {
        let pb = Problem::with_defaults(kind);
        let curve = sweep(&pb, &[-0.2, -0.05, 0.0, 0.1, 0.25]).unwrap();
        for r in &curve.rows {
            assert_eq!(r.status, RowStatus::Ok, "{kind} {}", r.theta0);
            let again = pb.cost(r.theta0, &r.inputs).unwrap();
            assert!((again - r.value).abs() <= 1e-12, "{kind} {}: {again} vs {}", r.theta0, r.value);
        }
    }
}

#[test]
fn single_point_sweep_equals_direct_call() {
    for kind in [Maneuver::Touchdown, Maneuver::Liftoff] {
        let pb = Problem::with_defaults(kind);
        let curve = sweep(&pb, &[0.08]).unwrap();
        let direct = pb.optimize(0.08, None).unwrap();
        assert_eq!(curve.rows.len(), 1);
        assert_eq!(curve.rows[0].inputs, direct.inputs);
        assert_eq!(curve.rows[0].value, direct.value);
    }
}

#[test]
fn warm_start_agrees_with_cold_start() {
    let grid = [-0.2, -0.15, -0.1, 0.1, 0.15, 0.2];
    let mut pb = Problem::with_defaults(Maneuver::Touchdown);
    let cold = sweep(&pb, &grid).unwrap();
    pb.optimizer.warm_start = true;
    let warm = sweep(&pb, &grid).unwrap();
    for (c, w) in cold.rows.iter().zip(&warm.rows) {
        assert!((c.value - w.value).abs() <= 1e-7, "{}: {} vs {}", c.theta0, c.value, w.value);
        assert!((c.inputs.u1 - w.inputs.u1).abs() <= 1e-7 && (c.inputs.u2 - w.inputs.u2).abs() <= 1e-7);
    }
}

#[test]
fn symmetric_sweep_value_is_even() {
    let pb = symmetric_touchdown();
    let curve = sweep(&pb, &[-0.2, -0.1, 0.1, 0.2]).unwrap();
    let v: Vec<f64> = curve.rows.iter().map(|r| r.value).collect();
    assert!((v[0] - v[3]).abs() <= 1e-6 && (v[1] - v[2]).abs() <= 1e-6, "{v:?}");
}

#[test]
fn unsorted_grid_is_rejected() {
    let pb = Problem::with_defaults(Maneuver::Liftoff);
    assert!(sweep(&pb, &[0.1, 0.0]).is_err());
}

#[test]
fn value_policy_csv_layout() {
    let pb = Problem::with_defaults(Maneuver::Liftoff);
    let curve = sweep(&pb, &[-0.1, 0.1]).unwrap();
    let mut buf = Vec::new();
    curve.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "theta0,u1,u2,u12,value,theta_terminal,t_terminal,mode_sequence,status");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].contains("{1;2}>{2}>{}") && lines[1].ends_with(",ok"));
    assert_abs_diff_eq!(lines[2].split(',').next().unwrap().parse::<f64>().unwrap(), 0.1);
}
