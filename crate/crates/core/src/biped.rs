//! Sagittal-plane biped: a pitching body on two spring-damper legs ending in
//! point feet, with the ground as two unilateral constraints.
//!
//! Coordinates are `q = (z, θ, z_f1, z_f2)`: body height, body pitch and the
//! heights of the left (1) and right (2) feet. Leg `i` attaches to the body
//! at horizontal offset `∓w`, so `ρ₁ = z − w sinθ − z_f1` and
//! `ρ₂ = z + w sinθ − z_f2`. The mass matrix is constant and diagonal, so
//! the legs are force coupled but not inertially coupled.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{contact_forces, ContactMode, HybridState, MechanicalSystem};
use crate::error::{Error, Result};
use crate::flow::{flow, Crossing, Event, EventKind, FlowConfig, Termination, Trajectory};

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BipedParams {
    /// Body mass (kg).
    pub m: f64,
    /// Body pitch inertia (kg m²).
    pub inertia: f64,
    /// Foot mass (kg).
    pub m_f: f64,
    /// Hip half-width (m).
    pub w: f64,
    /// Leg stiffness (N/m).
    pub k: f64,
    /// Leg damping (N s/m).
    pub b: f64,
    /// Leg rest length (m).
    pub rho0: f64,
    pub g: f64,
    /// Clearance of the lower foot at the start of touchdown (m).
    pub drop_gap: f64,
    /// Extra leg compression below static stance at the start of liftoff (m).
    pub liftoff_compression: f64,
}

impl Default for BipedParams {
    fn default() -> Self {
        BipedParams {
            m: 1.0,
            inertia: 0.1,
            m_f: 0.1,
            w: 0.2,
            k: 200.0,
            b: 2.0,
            rho0: 1.0,
            g: 9.81,
            drop_gap: 0.05,
            liftoff_compression: 0.1,
        }
    }
}

impl BipedParams {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("m", self.m),
            ("inertia", self.inertia),
            ("m_f", self.m_f),
            ("w", self.w),
            ("k", self.k),
            ("b", self.b),
            ("rho0", self.rho0),
            ("g", self.g),
            ("drop_gap", self.drop_gap),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Model(format!("biped parameter {name} must be positive, got {v}")));
            }
        }
        if !(self.liftoff_compression.is_finite() && self.liftoff_compression >= 0.0) {
            return Err(Error::Model("liftoff_compression must be non-negative".into()));
        }
        if self.m_f > self.m / 5.0 {
            warn!("foot mass {} is not small relative to body mass {}", self.m_f, self.m);
        }
        Ok(())
    }
}

/// Constant inputs, each gated to one contact mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyInputs {
    /// Left-leg force in mode {1} (N).
    pub u1: f64,
    /// Right-leg force in mode {2} (N).
    pub u2: f64,
    /// Body torque in mode {1,2} (N m).
    pub u12: f64,
}

impl PolicyInputs {
    pub fn new(u1: f64, u2: f64, u12: f64) -> Self {
        PolicyInputs { u1, u2, u12 }
    }

    /// Left/right mirror image: legs swapped and torque reversed.
    pub fn mirrored(&self) -> Self {
        PolicyInputs { u1: self.u2, u2: self.u1, u12: -self.u12 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Maneuver {
    Touchdown,
    Liftoff,
}

impl std::fmt::Display for Maneuver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Maneuver::Touchdown => "touchdown",
            Maneuver::Liftoff => "liftoff",
        })
    }
}

impl std::str::FromStr for Maneuver {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "touchdown" => Ok(Maneuver::Touchdown),
            "liftoff" => Ok(Maneuver::Liftoff),
            other => Err(Error::Config(format!("unknown maneuver '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Biped {
    pub params: BipedParams,
}

impl Biped {
    pub fn new(params: BipedParams) -> Result<Self> {
        params.validate()?;
        Ok(Biped { params })
    }

    /// Leg lengths `(ρ₁, ρ₂)` and their rates.
    pub fn legs(&self, q: &DVector<f64>, qd: &DVector<f64>) -> ([f64; 2], [f64; 2]) {
        let w = self.params.w;
        let (s, c) = q[1].sin_cos();
        let rho = [q[0] - w * s - q[2], q[0] + w * s - q[3]];
        let rho_dot = [qd[0] - w * c * qd[1] - qd[2], qd[0] + w * c * qd[1] - qd[3]];
        (rho, rho_dot)
    }

    /// Compressive leg forces including the mode-gated inputs.
    pub fn leg_forces(
        &self,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        mode: &ContactMode,
        u: &PolicyInputs,
    ) -> [f64; 2] {
        let p = &self.params;
        let (rho, rho_dot) = self.legs(q, qd);
        let single = |i: usize| mode.len() == 1 && mode.contains(i);
        let extra = [if single(LEFT) { u.u1 } else { 0.0 }, if single(RIGHT) { u.u2 } else { 0.0 }];
        [0, 1].map(|i| p.k * (p.rho0 - rho[i]) - p.b * rho_dot[i] + extra[i])
    }

    /// Kinetic plus gravitational plus spring energy.
    pub fn energy(&self, q: &DVector<f64>, qd: &DVector<f64>) -> f64 {
        let p = &self.params;
        let (rho, _) = self.legs(q, qd);
        let kinetic = 0.5 * (p.m * qd[0].powi(2) + p.inertia * qd[1].powi(2) + p.m_f * (qd[2].powi(2) + qd[3].powi(2)));
        let gravity = p.g * (p.m * q[0] + p.m_f * (q[2] + q[3]));
        let springs = 0.5 * p.k * ((rho[0] - p.rho0).powi(2) + (rho[1] - p.rho0).powi(2));
        kinetic + gravity + springs
    }

    /// Power dissipated by the leg dampers.
    pub fn dissipation(&self, q: &DVector<f64>, qd: &DVector<f64>) -> f64 {
        let (_, rho_dot) = self.legs(q, qd);
        self.params.b * (rho_dot[0].powi(2) + rho_dot[1].powi(2))
    }

    /// Height of the total center of mass.
    pub fn com_height(&self, q: &DVector<f64>) -> f64 {
        let p = &self.params;
        (p.m * q[0] + p.m_f * (q[2] + q[3])) / (p.m + 2.0 * p.m_f)
    }
}

impl MechanicalSystem for Biped {
    type Input = PolicyInputs;

    fn dof(&self) -> usize {
        4
    }

    fn num_constraints(&self) -> usize {
        2
    }

    fn mass_matrix(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        let p = &self.params;
        DMatrix::from_diagonal(&DVector::from_vec(vec![p.m, p.inertia, p.m_f, p.m_f]))
    }

    fn effort(
        &self,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        mode: &ContactMode,
        u: &PolicyInputs,
    ) -> DVector<f64> {
        let p = &self.params;
        let [f1, f2] = self.leg_forces(q, qd, mode, u);
        let lever = p.w * q[1].cos();
        let torque = if mode.len() == 2 { u.u12 } else { 0.0 };
        DVector::from_vec(vec![
            -p.m * p.g + f1 + f2,
            -lever * f1 + lever * f2 + torque,
            -p.m_f * p.g - f1,
            -p.m_f * p.g - f2,
        ])
    }

    fn constraints(&self, q: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![q[2], q[3]])
    }

    fn constraint_jacobian(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 4, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0])
    }

    fn constraint_curvature(&self, _q: &DVector<f64>, _qd: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(2)
    }
}

/// Builds the biped model after validating its parameters.
pub fn biped_system(p: &BipedParams) -> Result<Biped> {
    Biped::new(p.clone())
}

pub fn initial_state(kind: Maneuver, theta0: f64, p: &BipedParams) -> Result<HybridState> {
    if !(theta0.is_finite() && theta0.abs() <= 0.5) {
        return Err(Error::Config(format!("initial pitch {theta0} outside [-0.5, 0.5] rad")));
    }
    let biped = Biped::new(p.clone())?;
    let offset = p.w * theta0.sin();
    match kind {
        Maneuver::Touchdown => {
            let z = p.drop_gap + p.rho0 + offset.abs();
            let q = DVector::from_vec(vec![z, theta0, z - offset - p.rho0, z + offset - p.rho0]);
            Ok(HybridState::new(q, DVector::zeros(4), ContactMode::empty(), 0.0))
        }
        Maneuver::Liftoff => {
            let z = p.rho0 - p.m * p.g / (2.0 * p.k) - p.liftoff_compression;
            let q = DVector::from_vec(vec![z, theta0, 0.0, 0.0]);
            let s = HybridState::new(q, DVector::zeros(4), ContactMode::full(2), 0.0);
            let (_, lambda) = contact_forces(&biped, &s, &PolicyInputs::default())?;
            if lambda.iter().any(|&l| !(l > 0.0)) {
                return Err(Error::InfeasibleStart { lambda: lambda.iter().copied().collect() });
            }
            Ok(s)
        }
    }
}

fn body_rate(s: &HybridState) -> f64 {
    s.qd[0]
}

fn after_first_contact(events: &[Event], _mode: &ContactMode) -> bool {
    events.iter().any(|e| matches!(e.kind, EventKind::Activation(_)))
}

fn airborne_after_release(events: &[Event], mode: &ContactMode) -> bool {
    mode.is_empty() && events.iter().any(|e| matches!(e.kind, EventKind::Deactivation(_)))
}

/// The termination event of a maneuver: body-height nadir after first
/// contact, or apex once both feet have left the ground.
pub fn termination(kind: Maneuver) -> Termination {
    match kind {
        Maneuver::Touchdown => Termination {
            name: "nadir".into(),
            crossing: Crossing::Rising,
            guard: body_rate,
            armed: after_first_contact,
        },
        Maneuver::Liftoff => Termination {
            name: "apex".into(),
            crossing: Crossing::Falling,
            guard: body_rate,
            armed: airborne_after_release,
        },
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    /// Pitch at nadir (touchdown) or apex (liftoff).
    pub theta_terminal: f64,
    pub t_terminal: f64,
    pub mode_sequence: Vec<ContactMode>,
    pub trajectory: Trajectory,
}

impl Outcome {
    /// Mode sequence as one CSV-safe field, e.g. `{1;2}>{2}>{}`.
    pub fn mode_sequence_field(&self) -> String {
        self.mode_sequence
            .iter()
            .map(|m| format!("{{{}}}", m.to_field()))
            .collect::<Vec<_>>()
            .join(">")
    }
}

pub fn run_maneuver(
    kind: Maneuver,
    theta0: f64,
    u: &PolicyInputs,
    p: &BipedParams,
    cfg: &FlowConfig,
) -> Result<Outcome> {
    let biped = Biped::new(p.clone())?;
    let x0 = initial_state(kind, theta0, p)?;
    let term = termination(kind);
    let traj = flow(&biped, &x0, |_| *u, cfg, std::slice::from_ref(&term))?;
    if traj.terminated_by.is_none() {
        return Err(Error::Horizon { name: term.name, horizon: cfg.horizon_t });
    }
    let last = traj.last();
    Ok(Outcome {
        theta_terminal: last.q[1],
        t_terminal: last.t,
        mode_sequence: traj.mode_sequence(),
        trajectory: traj,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostParams {
    pub theta_desired: f64,
    pub a1: f64,
    pub a2: f64,
    pub a12: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams { theta_desired: 0.0, a1: 1e-3, a2: 2e-3, a12: 1e-3 }
    }
}

impl CostParams {
    /// Defaults per maneuver. Touchdown aims for a slightly pitched nadir: with a
    /// level target the optimal leg forces vanish to second order at θ₀ = 0.
    pub fn default_for(kind: Maneuver) -> Self {
        match kind {
            Maneuver::Touchdown => CostParams { theta_desired: 0.05, ..CostParams::default() },
            Maneuver::Liftoff => CostParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.theta_desired.is_finite() {
            return Err(Error::Config("theta_desired must be finite".into()));
        }
        for (name, v) in [("a1", self.a1), ("a2", self.a2), ("a12", self.a12)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("penalty {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

pub fn touchdown_cost(theta_nadir: f64, u: &PolicyInputs, cp: &CostParams) -> f64 {
    (theta_nadir - cp.theta_desired).powi(2) + cp.a1 * u.u1 * u.u1 + cp.a2 * u.u2 * u.u2
}

pub fn liftoff_cost(theta_apex: f64, u: &PolicyInputs, cp: &CostParams) -> f64 {
    (theta_apex - cp.theta_desired).powi(2) + cp.a12 * u.u12 * u.u12
}

/// Cost of an outcome under the maneuver's cost function.
pub fn maneuver_cost(kind: Maneuver, o: &Outcome, u: &PolicyInputs, cp: &CostParams) -> f64 {
    match kind {
        Maneuver::Touchdown => touchdown_cost(o.theta_terminal, u, cp),
        Maneuver::Liftoff => liftoff_cost(o.theta_terminal, u, cp),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::impact_map;
    use crate::flow::step_fixed_mode;
    use approx::assert_abs_diff_eq;

    fn biped() -> Biped {
        Biped::new(BipedParams::default()).unwrap()
    }

    fn vec4(v: [f64; 4]) -> DVector<f64> {
        DVector::from_vec(v.to_vec())
    }

    #[test]
    fn jacobian_picks_out_foot_rates() {
        let b = biped();
        let qd = vec4([0.3, -1.0, 0.7, -0.2]);
        let rates = b.constraint_jacobian(&vec4([1.0, 0.1, 0.2, 0.3])) * &qd;
        assert_eq!(rates.as_slice(), &[0.7, -0.2]);
    }

    #[test]
    fn static_stance_reactions() {
        let b = biped();
        let p = &b.params;
        let z = p.rho0 - p.m * p.g / (2.0 * p.k);
        let s = HybridState::new(vec4([z, 0.0, 0.0, 0.0]), DVector::zeros(4), ContactMode::full(2), 0.0);
        let (qdd, lambda) = contact_forces(&b, &s, &PolicyInputs::default()).unwrap();
        assert!(qdd.amax() < 1e-12);
        for l in lambda.iter() {
            assert_abs_diff_eq!(*l, p.m_f * p.g + p.m * p.g / 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(*l, 5.886, epsilon = 1e-12);
        }
    }

    #[test]
    fn aerial_center_of_mass_falls_freely() {
        let b = biped();
        let q = vec4([1.2, 0.2, 0.1, 0.25]);
        let qd = vec4([0.5, -2.0, 1.5, -0.3]);
        let s = HybridState::new(q, qd, ContactMode::empty(), 0.0);
        let (qdd, _) = contact_forces(&b, &s, &PolicyInputs::new(3.0, -4.0, 7.0)).unwrap();
        let p = &b.params;
        let com_acc = (p.m * qdd[0] + p.m_f * (qdd[2] + qdd[3])) / (p.m + 2.0 * p.m_f);
        assert_abs_diff_eq!(com_acc, -p.g, epsilon = 1e-12);
    }

    #[test]
    fn inputs_are_mode_gated() {
        let b = biped();
        let q = vec4([1.0, 0.0, 0.0, 0.0]);
        let qd = DVector::zeros(4);
        let u = PolicyInputs::new(3.0, 4.0, 5.0);
        let base = b.effort(&q, &qd, &ContactMode::empty(), &PolicyInputs::default());
        let air = b.effort(&q, &qd, &ContactMode::empty(), &u);
        assert_eq!(air, base);
        let left = b.effort(&q, &qd, &ContactMode::from_indices([LEFT]), &u);
        assert_abs_diff_eq!(left[2] - base[2], -3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(left[3], base[3]);
        let right = b.effort(&q, &qd, &ContactMode::from_indices([RIGHT]), &u);
        assert_abs_diff_eq!(right[3] - base[3], -4.0, epsilon = 1e-12);
        let both = b.effort(&q, &qd, &ContactMode::full(2), &u);
        assert_abs_diff_eq!(both[1] - base[1], 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(both[2], base[2]);
    }

    #[test]
    fn foot_impact_leaves_body_velocity_alone() {
        let b = biped();
        let q = vec4([1.0, 0.0, 0.0, 0.3]);
        let qd = vec4([-1.0, 0.4, -2.0, -1.0]);
        let after = impact_map(&b, &q, &qd, &ContactMode::from_indices([LEFT])).unwrap();
        assert_eq!((after[0], after[1], after[3]), (-1.0, 0.4, -1.0));
        assert!(after[2].abs() < 1e-15);
    }

    #[test]
    fn dampers_account_for_energy_loss() {
        let b = biped();
        let mut s = HybridState::new(
            vec4([1.3, 0.1, 0.25, 0.35]),
            vec4([0.2, 1.0, -0.5, 0.8]),
            ContactMode::empty(),
            0.0,
        );
        let u = PolicyInputs::default();
        let h = 1e-4;
        let e0 = b.energy(&s.q, &s.qd);
        let mut dissipated = 0.0;
        for _ in 0..1000 {
            let next = step_fixed_mode(&b, &s, &u, h).unwrap();
            dissipated += 0.5 * h * (b.dissipation(&s.q, &s.qd) + b.dissipation(&next.q, &next.qd));
            s = next;
        }
        let e1 = b.energy(&s.q, &s.qd);
        assert!(dissipated > 0.01);
        assert_abs_diff_eq!(e0 - e1, dissipated, epsilon = 1e-6);
    }

    #[test]
    fn touchdown_start_geometry() {
        let p = BipedParams::default();
        let level = initial_state(Maneuver::Touchdown, 0.0, &p).unwrap();
        assert_abs_diff_eq!(level.q[2], p.drop_gap, epsilon = 1e-15);
        assert_eq!(level.q[2], level.q[3]);

        let theta0 = 0.2;
        let tilted = initial_state(Maneuver::Touchdown, theta0, &p).unwrap();
        let (rho, _) = biped().legs(&tilted.q, &tilted.qd);
        assert_abs_diff_eq!(rho[0], p.rho0, epsilon = 1e-15);
        assert_abs_diff_eq!(rho[1], p.rho0, epsilon = 1e-15);
        // Positive pitch lowers the left hip, so the left foot is lower.
        assert_abs_diff_eq!(tilted.q[2], p.drop_gap, epsilon = 1e-15);
        assert_abs_diff_eq!(tilted.q[3] - tilted.q[2], 2.0 * p.w * theta0.sin(), epsilon = 1e-15);
        assert!(initial_state(Maneuver::Touchdown, 0.6, &p).is_err());
    }

    #[test]
    fn unloaded_liftoff_start_is_an_equilibrium() {
        let p = BipedParams { liftoff_compression: 0.0, ..BipedParams::default() };
        let cfg = FlowConfig { horizon_t: 0.5, ..FlowConfig::default() };
        let x0 = initial_state(Maneuver::Liftoff, 0.0, &p).unwrap();
        let traj = flow(&Biped::new(p.clone()).unwrap(), &x0, |_| PolicyInputs::default(), &cfg, &[]).unwrap();
        assert!(traj.events.is_empty());
        assert_eq!(traj.mode_sequence(), vec![ContactMode::full(2)]);
        let last = traj.last();
        for (a, b) in last.q.iter().zip(x0.q.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(last.qd.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn liftoff_rejects_a_foot_pulled_off_the_ground() {
        let p = BipedParams { liftoff_compression: 0.0, ..BipedParams::default() };
        assert!(initial_state(Maneuver::Liftoff, 0.1, &p).is_ok());
        // At large pitch the raised leg is stretched and would pull its foot up.
        match initial_state(Maneuver::Liftoff, 0.5, &p) {
            Err(Error::InfeasibleStart { lambda }) => assert!(lambda[1] < 0.0 && lambda[0] > 0.0),
            other => panic!("expected infeasible start, got {other:?}"),
        }
    }

    #[test]
    fn level_touchdown_stays_level() {
        let u = PolicyInputs::new(2.0, 2.0, 0.0);
        let o = run_maneuver(Maneuver::Touchdown, 0.0, &u, &BipedParams::default(), &FlowConfig::default()).unwrap();
        assert_eq!(o.theta_terminal, 0.0);
        assert_eq!(o.mode_sequence, vec![ContactMode::empty(), ContactMode::full(2)]);
    }

    #[test]
    fn mirror_image_negates_the_outcome() {
        let p = BipedParams::default();
        let cfg = FlowConfig::default();
        for kind in [Maneuver::Touchdown, Maneuver::Liftoff] {
            let u = PolicyInputs::new(4.0, 1.5, 0.3);
            for theta0 in [0.02, 0.17] {
                let a = run_maneuver(kind, theta0, &u, &p, &cfg).unwrap();
                let b = run_maneuver(kind, -theta0, &u.mirrored(), &p, &cfg).unwrap();
                assert!((a.theta_terminal + b.theta_terminal).abs() < 1e-12, "{kind} {theta0}");
            }
        }
    }

    #[test]
    fn nadir_pitch_is_step_converged() {
        // Value frozen from a self-consistency run at two step sizes.
        let p = BipedParams::default();
        let u = PolicyInputs::new(5.0, 2.0, 0.0);
        let run = |step_h: f64| {
            let cfg = FlowConfig { step_h, ..FlowConfig::default() };
            run_maneuver(Maneuver::Touchdown, 0.05, &u, &p, &cfg).unwrap()
        };
        let coarse = run(1e-3);
        let fine = run(2.5e-4);
        assert!((coarse.theta_terminal - fine.theta_terminal).abs() <= 1e-5);
        assert_abs_diff_eq!(coarse.theta_terminal, -8.028_565_67e-4, epsilon = 1e-12);
        assert_eq!(coarse.mode_sequence_field(), "{}>{1}>{1;2}");
        assert_eq!(coarse.trajectory.terminated_by.as_deref(), Some("nadir"));
    }

    #[test]
    fn short_horizon_is_reported() {
        let cfg = FlowConfig { horizon_t: 0.05, ..FlowConfig::default() };
        let err = run_maneuver(Maneuver::Touchdown, 0.1, &PolicyInputs::default(), &BipedParams::default(), &cfg);
        assert!(matches!(err, Err(Error::Horizon { .. })));
    }

    #[test]
    fn cost_arithmetic() {
        let cp = CostParams::default();
        let zero = PolicyInputs::default();
        assert_eq!(touchdown_cost(0.0, &zero, &cp), 0.0);
        assert_abs_diff_eq!(touchdown_cost(0.1, &zero, &cp), 0.01, epsilon = 1e-15);
        let off = CostParams { theta_desired: 0.1, ..cp.clone() };
        assert_abs_diff_eq!(touchdown_cost(0.2, &PolicyInputs::new(2.0, 0.0, 0.0), &off), 0.014, epsilon = 1e-15);
        assert_eq!(liftoff_cost(0.0, &zero, &cp), 0.0);
        assert_abs_diff_eq!(liftoff_cost(0.3, &PolicyInputs::new(0.0, 0.0, 1.0), &cp), 0.091, epsilon = 1e-15);
        let u = PolicyInputs::new(0.0, 0.0, 0.7);
        assert_eq!(liftoff_cost(0.1, &u, &cp), liftoff_cost(0.1, &u.mirrored(), &cp));
    }

    #[test]
    fn params_reject_unknown_keys_and_bad_values() {
        assert!(serde_json::from_str::<BipedParams>(r#"{"mass": 1}"#).is_err());
        let p: BipedParams = serde_json::from_str(r#"{"k": 300}"#).unwrap();
        assert_eq!(p.k, 300.0);
        assert_eq!(p.m, 1.0);
        assert!(Biped::new(BipedParams { b: 0.0, ..BipedParams::default() }).is_err());
        assert_eq!("liftoff".parse::<Maneuver>().unwrap(), Maneuver::Liftoff);
        assert!("hop".parse::<Maneuver>().is_err());
    }
}
