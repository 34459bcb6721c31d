//! Per-initial-condition input optimization and value/policy sweeps.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biped::{maneuver_cost, run_maneuver, BipedParams, CostParams, Maneuver, Outcome, PolicyInputs, LEFT, RIGHT};
use crate::dynamics::ContactMode;
use crate::error::{Error, Result};
use crate::flow::FlowConfig;

/// Points in the bracket-selecting scan that precedes every Brent solve.
pub const SCAN_POINTS: usize = 33;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub fx: f64,
    pub evals: usize,
    /// False when the evaluation budget ran out before the tolerance was met.
    pub converged: bool,
}

/// Bounded scalar minimization: a uniform scan selects the bracket around
/// the best sample, then Brent's method (golden section with parabolic
/// steps) refines it. Returns the best point evaluated overall.
pub fn brent_min<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_evals: usize) -> Result<Minimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    brent_min_partial(|x| f(x).map(Some), lo, hi, tol, max_evals)
}

/// [`brent_min`] for objectives that are undefined (`None`) at some inputs.
/// Undefined points rank above every defined one and are never returned.
pub fn brent_min_partial<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_evals: usize) -> Result<Minimum>
where
    F: FnMut(f64) -> Result<Option<f64>>,
{
    if !(lo.is_finite() && hi.is_finite() && lo < hi && tol > 0.0) {
        return Err(Error::Config(format!("bad scalar search interval [{lo}, {hi}] with tol {tol}")));
    }
    let mut evals = 0usize;
    let mut best = (f64::NAN, f64::INFINITY);
    let mut eval = |x: f64, evals: &mut usize, best: &mut (f64, f64)| -> Result<f64> {
        let fx = f(x)?;
        *evals += 1;
        let Some(fx) = fx else {
            return Ok(f64::INFINITY);
        };
        if !fx.is_finite() {
            return Err(Error::NonFiniteCost { at: x, value: fx });
        }
        if fx < best.1 {
            *best = (x, fx);
        }
        Ok(fx)
    };

    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let mut k_best = 0;
    let mut f_scan = f64::INFINITY;
    for k in 0..SCAN_POINTS {
        let x = if k == SCAN_POINTS - 1 { hi } else { lo + step * k as f64 };
        let fx = eval(x, &mut evals, &mut best)?;
        if fx < f_scan {
            f_scan = fx;
            k_best = k;
        }
    }
    let mut a = if k_best == 0 { lo } else { lo + step * (k_best - 1) as f64 };
    let mut b = if k_best + 1 >= SCAN_POINTS { hi } else { lo + step * (k_best + 1) as f64 };

    // Bounded Brent iteration on [a, b].
    let sqrt_eps = f64::EPSILON.sqrt();
    let golden = 0.5 * (3.0 - 5f64.sqrt());
    let mut fulc = a + golden * (b - a);
    let mut nfc = fulc;
    let mut xf = fulc;
    let (mut rat, mut e) = (0.0f64, 0.0f64);
    let mut fx = eval(xf, &mut evals, &mut best)?;
    let (mut ffulc, mut fnfc) = (fx, fx);
    let mut xm = 0.5 * (a + b);
    let mut tol1 = sqrt_eps * xf.abs() + tol / 3.0;
    let mut tol2 = 2.0 * tol1;
    let mut converged = true;
    while (xf - xm).abs() > tol2 - 0.5 * (b - a) {
        if evals >= max_evals {
            converged = false;
            break;
        }
        let mut use_golden = true;
        if e.abs() > tol1 {
            use_golden = false;
            let mut r = (xf - nfc) * (fx - ffulc);
            let mut q = (xf - fulc) * (fx - fnfc);
            let mut p = (xf - fulc) * q - (xf - nfc) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            r = e;
            e = rat;
            if p.abs() < (0.5 * q * r).abs() && p > q * (a - xf) && p < q * (b - xf) {
                rat = p / q;
                let x = xf + rat;
                if (x - a) < tol2 || (b - x) < tol2 {
                    rat = if xm >= xf { tol1 } else { -tol1 };
                }
            } else {
                use_golden = true;
            }
        }
        if use_golden {
            e = if xf >= xm { a - xf } else { b - xf };
            rat = golden * e;
        }
        let si = if rat >= 0.0 { 1.0 } else { -1.0 };
        let x = xf + si * rat.abs().max(tol1);
        let fu = eval(x, &mut evals, &mut best)?;
        if fu <= fx {
            if x >= xf {
                a = xf;
            } else {
                b = xf;
            }
            fulc = nfc;
            ffulc = fnfc;
            nfc = xf;
            fnfc = fx;
            xf = x;
            fx = fu;
        } else {
            if x < xf {
                a = x;
            } else {
                b = x;
            }
            if fu <= fnfc || nfc == xf {
                fulc = nfc;
                ffulc = fnfc;
                nfc = x;
                fnfc = fu;
            } else if fu <= ffulc || fulc == xf || fulc == nfc {
                fulc = x;
                ffulc = fu;
            }
        }
        xm = 0.5 * (a + b);
        tol1 = sqrt_eps * xf.abs() + tol / 3.0;
        tol2 = 2.0 * tol1;
    }
    if best.0.is_nan() {
        return Err(Error::Config(format!("objective undefined everywhere on [{lo}, {hi}]")));
    }
    Ok(Minimum { x: best.0, fx: best.1, evals, converged })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizationConfig {
    pub u1_bounds: [f64; 2],
    pub u2_bounds: [f64; 2],
    pub u12_bounds: [f64; 2],
    /// Absolute tolerance on each scalar input.
    pub tol: f64,
    /// Evaluation budget per scalar solve, scan included.
    pub max_evals: usize,
    pub rounds: usize,
    /// Start each sweep row from its left neighbour's solution.
    pub warm_start: bool,
    /// Leg forces `(u1, u2)` held fixed while the liftoff torque is optimized.
    pub liftoff_leg_forces: [f64; 2],
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        OptimizationConfig {
            u1_bounds: [-20.0, 20.0],
            u2_bounds: [-20.0, 20.0],
            u12_bounds: [-20.0, 20.0],
            tol: 1e-8,
            max_evals: 200,
            rounds: 4,
            warm_start: false,
            liftoff_leg_forces: [1.0, 15.0],
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [("u1", self.u1_bounds), ("u2", self.u2_bounds), ("u12", self.u12_bounds)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("{name} bounds must be finite with lo < hi")));
            }
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::Config("optimizer tol must be positive".into()));
        }
        if self.max_evals <= SCAN_POINTS || self.rounds == 0 {
            return Err(Error::Config(format!(
                "max_evals must exceed the {SCAN_POINTS}-point scan and rounds must be positive"
            )));
        }
        if self.liftoff_leg_forces.iter().any(|u| !u.is_finite()) {
            return Err(Error::Config("liftoff leg forces must be finite".into()));
        }
        Ok(())
    }
}

/// Outcome fields kept in a sweep row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeSummary {
    pub theta_terminal: f64,
    pub t_terminal: f64,
    pub mode_sequence: String,
}

impl From<&Outcome> for OutcomeSummary {
    fn from(o: &Outcome) -> Self {
        OutcomeSummary {
            theta_terminal: o.theta_terminal,
            t_terminal: o.t_terminal,
            mode_sequence: o.mode_sequence_field(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub inputs: PolicyInputs,
    pub value: f64,
    pub outcome: OutcomeSummary,
    pub evaluations: usize,
    pub converged: bool,
}

/// Everything needed to evaluate and optimize one maneuver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub maneuver: Maneuver,
    pub params: BipedParams,
    pub cost: CostParams,
    pub flow: FlowConfig,
    pub optimizer: OptimizationConfig,
}

impl Problem {
    pub fn new(
        maneuver: Maneuver,
        params: BipedParams,
        cost: CostParams,
        flow: FlowConfig,
        optimizer: OptimizationConfig,
    ) -> Result<Self> {
        params.validate()?;
        cost.validate()?;
        flow.validate()?;
        optimizer.validate()?;
        Ok(Problem { maneuver, params, cost, flow, optimizer })
    }

    /// Default problem for a maneuver.
    pub fn with_defaults(maneuver: Maneuver) -> Self {
        Problem {
            maneuver,
            params: BipedParams::default(),
            cost: CostParams::default_for(maneuver),
            flow: FlowConfig::default(),
            optimizer: OptimizationConfig::default(),
        }
    }

    pub fn outcome(&self, theta0: f64, u: &PolicyInputs) -> Result<Outcome> {
        run_maneuver(self.maneuver, theta0, u, &self.params, &self.flow)
    }

    pub fn cost(&self, theta0: f64, u: &PolicyInputs) -> Result<f64> {
        let o = self.outcome(theta0, u)?;
        Ok(maneuver_cost(self.maneuver, &o, u, &self.cost))
    }

    /// Cost, or `None` when the inputs make the maneuver ill-defined: the
    /// terminal event never fires or the contact modes chatter.
    pub fn cost_if_defined(&self, theta0: f64, u: &PolicyInputs) -> Result<Option<f64>> {
        match self.cost(theta0, u) {
            Ok(c) => Ok(Some(c)),
            Err(Error::Horizon { .. } | Error::ZenoGuard { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Inputs for a liftoff run with torque `u12`.
    pub fn liftoff_inputs(&self, u12: f64) -> PolicyInputs {
        let [u1, u2] = self.optimizer.liftoff_leg_forces;
        PolicyInputs::new(u1, u2, u12)
    }

    pub fn optimize(&self, theta0: f64, warm: Option<PolicyInputs>) -> Result<Solution> {
        match self.maneuver {
            Maneuver::Touchdown => optimize_touchdown(self, theta0, warm),
            Maneuver::Liftoff => optimize_liftoff(self, theta0),
        }
    }
}

fn clamp_to(x: f64, [lo, hi]: [f64; 2]) -> f64 {
    x.clamp(lo, hi)
}

fn visits(o: &Outcome, leg: usize) -> bool {
    let single = ContactMode::from_indices([leg]);
    o.mode_sequence.contains(&single)
}

/// Coordinate descent over `(u1, u2)`, one bounded scalar solve per
/// coordinate. A leg whose single-support mode is never entered cannot
/// affect the trajectory, so its input is set to the penalty minimizer
/// without a solve.
pub fn optimize_touchdown(pb: &Problem, theta0: f64, warm: Option<PolicyInputs>) -> Result<Solution> {
    let oc = &pb.optimizer;
    let start = warm.unwrap_or_default();
    let mut u = PolicyInputs::new(clamp_to(start.u1, oc.u1_bounds), clamp_to(start.u2, oc.u2_bounds), 0.0);
    let mut outcome = pb.outcome(theta0, &u)?;
    let mut value = maneuver_cost(pb.maneuver, &outcome, &u, &pb.cost);
    let mut evaluations = 1;
    let mut converged = false;
    // Value of the other coordinate when each was last solved.
    let mut solved_against: [Option<f64>; 2] = [None, None];

    for _ in 0..oc.rounds {
        let before = value;
        for leg in [LEFT, RIGHT] {
            let other = if leg == LEFT { u.u2 } else { u.u1 };
            if solved_against[leg] == Some(other) {
                continue;
            }
            let bounds = if leg == LEFT { oc.u1_bounds } else { oc.u2_bounds };
            let with = |x: f64| {
                let mut v = u;
                if leg == LEFT {
                    v.u1 = x;
                } else {
                    v.u2 = x;
                }
                v
            };
            let candidate = if visits(&outcome, leg) {
                let m = brent_min_partial(
                    |x| pb.cost_if_defined(theta0, &with(x)),
                    bounds[0],
                    bounds[1],
                    oc.tol,
                    oc.max_evals,
                )?;
                evaluations += m.evals;
                m.x
            } else {
                clamp_to(0.0, bounds)
            };
            let trial = with(candidate);
            let trial_outcome = pb.outcome(theta0, &trial)?;
            let trial_value = maneuver_cost(pb.maneuver, &trial_outcome, &trial, &pb.cost);
            evaluations += 1;
            if trial_value <= value {
                u = trial;
                outcome = trial_outcome;
                value = trial_value;
            }
            solved_against[leg] = Some(if leg == LEFT { u.u2 } else { u.u1 });
        }
        if before - value < 1e-12 {
            converged = true;
            break;
        }
    }
    if !converged && solved_against == [Some(u.u2), Some(u.u1)] {
        converged = true;
    }
    Ok(Solution { inputs: u, value, outcome: OutcomeSummary::from(&outcome), evaluations, converged })
}

/// Single bounded solve over the body torque with the leg forces fixed.
pub fn optimize_liftoff(pb: &Problem, theta0: f64) -> Result<Solution> {
    let oc = &pb.optimizer;
    let [lo, hi] = oc.u12_bounds;
    let m = brent_min_partial(|x| pb.cost_if_defined(theta0, &pb.liftoff_inputs(x)), lo, hi, oc.tol, oc.max_evals)?;
    let u = pb.liftoff_inputs(m.x);
    let outcome = pb.outcome(theta0, &u)?;
    let value = maneuver_cost(pb.maneuver, &outcome, &u, &pb.cost);
    Ok(Solution {
        inputs: u,
        value,
        outcome: OutcomeSummary::from(&outcome),
        evaluations: m.evals + 1,
        converged: m.converged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    NonConverged,
    Failed(String),
}

impl RowStatus {
    pub fn field(&self) -> String {
        match self {
            RowStatus::Ok => "ok".into(),
            RowStatus::NonConverged => "nonconverged".into(),
            RowStatus::Failed(msg) => format!("error: {}", msg.replace([',', '\n'], ";")),
        }
    }

    pub fn is_failed(&self) -> bool {
        matches!(self, RowStatus::Failed(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveRow {
    pub theta0: f64,
    pub inputs: PolicyInputs,
    pub value: f64,
    pub theta_terminal: f64,
    pub t_terminal: f64,
    pub mode_sequence: String,
    pub status: RowStatus,
}

impl CurveRow {
    fn failed(theta0: f64, err: &Error) -> Self {
        CurveRow {
            theta0,
            inputs: PolicyInputs::new(f64::NAN, f64::NAN, f64::NAN),
            value: f64::NAN,
            theta_terminal: f64::NAN,
            t_terminal: f64::NAN,
            mode_sequence: String::new(),
            status: RowStatus::Failed(err.to_string()),
        }
    }

    fn from_solution(theta0: f64, s: Solution) -> Self {
        CurveRow {
            theta0,
            inputs: s.inputs,
            value: s.value,
            theta_terminal: s.outcome.theta_terminal,
            t_terminal: s.outcome.t_terminal,
            mode_sequence: s.outcome.mode_sequence,
            status: if s.converged { RowStatus::Ok } else { RowStatus::NonConverged },
        }
    }
}

/// Optimal inputs and values over a grid of initial pitches.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValuePolicyCurve {
    pub maneuver: Maneuver,
    pub rows: Vec<CurveRow>,
}

impl ValuePolicyCurve {
    pub fn column(&self, f: impl Fn(&CurveRow) -> f64) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.theta0, f(r))).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "theta0,u1,u2,u12,value,theta_terminal,t_terminal,mode_sequence,status")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.theta0,
                r.inputs.u1,
                r.inputs.u2,
                r.inputs.u12,
                r.value,
                r.theta_terminal,
                r.t_terminal,
                r.mode_sequence,
                r.status.field()
            )?;
        }
        Ok(())
    }
}

fn check_sorted(grid: &[f64]) -> Result<()> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Optimizes every grid point. Rows come back in grid order; with warm
/// starting the rows are solved left to right, otherwise in parallel.
pub fn sweep(pb: &Problem, grid: &[f64]) -> Result<ValuePolicyCurve> {
    check_sorted(grid)?;
    let row = |theta0: f64, warm: Option<PolicyInputs>| match pb.optimize(theta0, warm) {
        Ok(s) => CurveRow::from_solution(theta0, s),
        Err(e) => CurveRow::failed(theta0, &e),
    };
    let rows = if pb.optimizer.warm_start {
        let mut rows: Vec<CurveRow> = Vec::with_capacity(grid.len());
        for &theta0 in grid {
            let warm = rows.last().filter(|r| !r.status.is_failed()).map(|r| r.inputs);
            rows.push(row(theta0, warm));
        }
        rows
    } else {
        grid.par_iter().map(|&theta0| row(theta0, None)).collect()
    };
    Ok(ValuePolicyCurve { maneuver: pb.maneuver, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeRow {
    pub theta0: f64,
    pub theta_terminal: f64,
    pub t_terminal: f64,
    pub cost: f64,
    pub mode_sequence: String,
    pub status: RowStatus,
}

/// Trajectory outcomes under one constant input over a grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeCurve {
    pub maneuver: Maneuver,
    pub inputs: PolicyInputs,
    pub rows: Vec<OutcomeRow>,
}

impl OutcomeCurve {
    pub fn column(&self, f: impl Fn(&OutcomeRow) -> f64) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.theta0, f(r))).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "theta0,theta_terminal,t_terminal,cost,mode_sequence,status")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.theta0,
                r.theta_terminal,
                r.t_terminal,
                r.cost,
                r.mode_sequence,
                r.status.field()
            )?;
        }
        Ok(())
    }
}

pub fn fixed_policy_sweep(pb: &Problem, u: &PolicyInputs, grid: &[f64]) -> Result<OutcomeCurve> {
    check_sorted(grid)?;
    let rows = grid
        .par_iter()
        .map(|&theta0| match pb.outcome(theta0, u) {
            Ok(o) => OutcomeRow {
                theta0,
                theta_terminal: o.theta_terminal,
                t_terminal: o.t_terminal,
                cost: maneuver_cost(pb.maneuver, &o, u, &pb.cost),
                mode_sequence: o.mode_sequence_field(),
                status: RowStatus::Ok,
            },
            Err(e) => OutcomeRow {
                theta0,
                theta_terminal: f64::NAN,
                t_terminal: f64::NAN,
                cost: f64::NAN,
                mode_sequence: String::new(),
                status: RowStatus::Failed(e.to_string()),
            },
        })
        .collect();
    Ok(OutcomeCurve { maneuver: pb.maneuver, inputs: *u, rows })
}
