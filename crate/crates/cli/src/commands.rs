use std::io::{self, Write};

use log::{info, warn};
use serde::Serialize;
use unilateral::biped::{biped_system, initial_state, termination, Maneuver};
use unilateral::flow::flow;
use unilateral::optimizer::{fixed_policy_sweep, sweep, CurveRow, OutcomeRow, ValuePolicyCurve};
use unilateral::regularity::{classify_curve, pg_divergence_experiment, task_seed, GradEstimator, PgReport, RegularityReport};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::OutputDir;

fn json_bytes<T: Serialize>(value: &T) -> io::Result<Vec<u8>> {
    let mut text = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
    text.push(b'\n');
    Ok(text)
}

fn write_report(out: &mut OutputDir, channel: &str, report: &RegularityReport) -> io::Result<()> {
    out.write_with(&format!("regularity_{channel}.csv"), |w| report.write_csv(w))?;
    for p in report.irregular() {
        info!("{channel}: {} at theta0 = {}", p.class.as_str(), p.x);
    }
    Ok(())
}

fn report_failures(label: &str, failed: usize, total: usize) {
    if failed > 0 {
        warn!("{label}: {failed} of {total} grid points failed");
    }
}

/// One trajectory from `cfg.theta0` under `cfg.inputs`.
pub fn simulate(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let biped = biped_system(&cfg.params)?;
    let x0 = initial_state(cfg.maneuver, cfg.theta0, &cfg.params)?;
    let u = cfg.inputs();
    let term = termination(cfg.maneuver);
    let traj = flow(&biped, &x0, |_| u, &cfg.flow, std::slice::from_ref(&term))?;
    match &traj.terminated_by {
        Some(name) => info!("{name} reached at t = {}", traj.last().t),
        None => info!("horizon reached at t = {} without '{}'", traj.last().t, term.name),
    }
    out.write_with("trajectory.csv", |w| traj.write_csv(w))?;
    out.write_with("events.jsonl", |w| traj.write_events_jsonl(w))?;
    out.write_with("modes.csv", |w| traj.write_mode_timeline_csv(w))?;
    Ok(())
}

/// Fixed-input outcome curves at the configured grid and its 4× refinement.
pub fn sweep_outcomes(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let pb = cfg.problem()?;
    let u = cfg.inputs();
    let coarse = fixed_policy_sweep(&pb, &u, &cfg.grid.points())?;
    let fine = fixed_policy_sweep(&pb, &u, &cfg.grid.refined(4).points())?;
    for (label, c) in [("coarse", &coarse), ("fine", &fine)] {
        report_failures(label, c.rows.iter().filter(|r| r.status.is_failed()).count(), c.rows.len());
        out.write_with(&format!("outcomes_{label}.csv"), |w| c.write_csv(w))?;
    }
    if cfg.grid.count >= 3 {
        let channels: [(&str, fn(&OutcomeRow) -> f64); 2] =
            [("theta_terminal", |r| r.theta_terminal), ("cost", |r| r.cost)];
        for (name, col) in channels {
            let report = classify_curve(&coarse.column(col), &fine.column(col), cfg.thresholds)?;
            write_report(out, name, &report)?;
        }
    } else {
        warn!("grid has fewer than 3 points, skipping classification");
    }
    Ok(())
}

fn policy_channels(kind: Maneuver) -> Vec<(&'static str, fn(&CurveRow) -> f64)> {
    let value: (&'static str, fn(&CurveRow) -> f64) = ("value", |r| r.value);
    match kind {
        Maneuver::Touchdown => vec![value, ("u1", |r| r.inputs.u1), ("u2", |r| r.inputs.u2)],
        Maneuver::Liftoff => vec![value, ("u12", |r| r.inputs.u12)],
    }
}

/// Optimal value and policy curves at both resolutions plus their
/// regularity reports.
pub fn optimize(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let pb = cfg.problem()?;
    let coarse: ValuePolicyCurve = sweep(&pb, &cfg.grid.points())?;
    let fine = sweep(&pb, &cfg.grid.refined(4).points())?;
    for (label, c) in [("coarse", &coarse), ("fine", &fine)] {
        report_failures(label, c.rows.iter().filter(|r| r.status.is_failed()).count(), c.rows.len());
        out.write_with(&format!("value_policy_{label}.csv"), |w| c.write_csv(w))?;
    }
    if cfg.grid.count >= 3 {
        for (name, col) in policy_channels(cfg.maneuver) {
            let report = classify_curve(&coarse.column(col), &fine.column(col), cfg.thresholds)?;
            write_report(out, name, &report)?;
        }
    } else {
        warn!("grid has fewer than 3 points, skipping classification");
    }
    Ok(())
}

/// One policy-gradient step from the optimum at each configured pitch.
pub fn pg_demo(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let pb = cfg.problem()?;
    let pg = &cfg.pg;
    let mut reports: Vec<PgReport> = Vec::new();
    for (i, &theta0) in pg.theta0s.iter().enumerate() {
        let estimators = [
            GradEstimator::TrueB,
            GradEstimator::Smoothed { h_s: pg.h_s },
            GradEstimator::Sampled { h_s: pg.h_s, samples: pg.samples, seed: task_seed(cfg.seed, i as u64) },
        ];
        let report = pg_divergence_experiment(&pb, theta0, &pg.alphas, &estimators, pg.tol)?;
        for t in &report.trials {
            info!("theta0 = {theta0}: {} alpha = {} moved {:.3} alpha", t.estimator.name(), t.alpha, t.relative_step);
        }
        reports.push(report);
    }
    out.write("pg_report.json", &json_bytes(&reports)?)?;
    out.write_with("pg_summary.csv", |w| {
        writeln!(w, "theta0,estimator,alpha,step_norm,relative_step")?;
        for r in &reports {
            for t in &r.trials {
                writeln!(w, "{},{},{},{},{}", r.theta0, t.estimator.name(), t.alpha, t.step.step_norm, t.relative_step)?;
            }
        }
        Ok(())
    })?;
    Ok(())
}
