//! Event-driven integration of the mode-dependent dynamics.
//!
//! Fixed-step RK4 inside a mode; constraint activation, multiplier sign
//! changes and registered termination guards are bracketed per step and
//! localized by bisection on re-integrated partial steps.

use std::io::{self, Write};

use log::warn;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    consistent_mode, constrained_accel, contact_forces, impact_map, padded_multipliers, project_configuration,
    ContactMode, HybridState, MechanicalSystem, GAP_TOL,
};
use crate::error::{Error, Result};

/// Multipliers below this are treated as a release even without a bracket.
const RELEASE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    /// RK4 step (s).
    pub step_h: f64,
    /// Width of the bisection bracket at which localization stops (s).
    pub event_time_tol: f64,
    /// Events closer than this to the earliest one are processed jointly (s).
    pub simultaneity_window: f64,
    pub max_events: usize,
    /// Integration horizon (s).
    pub horizon_t: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            step_h: 1e-3,
            event_time_tol: 1e-10,
            simultaneity_window: 1e-9,
            max_events: 64,
            horizon_t: 3.0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.step_h, self.event_time_tol, self.simultaneity_window];
        if positive.iter().any(|x| !(x.is_finite() && *x > 0.0)) || self.max_events == 0 {
            return Err(Error::Config("flow tolerances must be positive".into()));
        }
        if !(self.horizon_t.is_finite() && self.horizon_t >= 0.0) {
            return Err(Error::Config("horizon_t must be finite and non-negative".into()));
        }
        if !(self.event_time_tol < self.simultaneity_window && self.simultaneity_window < self.step_h) {
            return Err(Error::Config(
                "need event_time_tol < simultaneity_window < step_h".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EventKind {
    Activation(usize),
    Deactivation(usize),
    Termination(String),
    /// A gap reached zero without the constraint being approached.
    Grazing(usize),
    ZenoGuard,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub pre_state: HybridState,
    pub post_state: HybridState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Crossing {
    /// From negative to non-negative.
    Rising,
    /// From positive to non-positive.
    Falling,
}

impl Crossing {
    fn brackets(self, before: f64, after: f64) -> bool {
        match self {
            Crossing::Rising => before < 0.0 && after >= 0.0,
            Crossing::Falling => before > 0.0 && after <= 0.0,
        }
    }

    fn crossed(self, value: f64) -> bool {
        match self {
            Crossing::Rising => value >= 0.0,
            Crossing::Falling => value <= 0.0,
        }
    }
}

/// A named scalar event that ends the flow when it crosses zero.
///
/// The guard is only watched while `armed` holds for the events logged so
/// far and the current mode.
#[derive(Clone, Debug)]
pub struct Termination {
    pub name: String,
    pub crossing: Crossing,
    pub guard: fn(&HybridState) -> f64,
    pub armed: fn(&[Event], &ContactMode) -> bool,
}

impl Termination {
    pub fn always(name: &str, crossing: Crossing, guard: fn(&HybridState) -> f64) -> Self {
        Termination {
            name: name.to_string(),
            crossing,
            guard,
            armed: |_, _| true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    pub mode: ContactMode,
    /// Reaction forces, zero for inactive constraints.
    pub lambda: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    pub terminated_by: Option<String>,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    /// Successive distinct modes.
    pub fn mode_sequence(&self) -> Vec<ContactMode> {
        let mut seq: Vec<ContactMode> = Vec::new();
        for s in &self.samples {
            if seq.last() != Some(&s.mode) {
                seq.push(s.mode.clone());
            }
        }
        seq
    }

    /// `(t_start, t_end, mode)` intervals covering the trajectory.
    pub fn mode_timeline(&self) -> Vec<(f64, f64, ContactMode)> {
        let mut out: Vec<(f64, f64, ContactMode)> = Vec::new();
        for s in &self.samples {
            match out.last_mut() {
                Some(last) if last.2 == s.mode => last.1 = s.t,
                Some(last) => {
                    last.1 = s.t;
                    out.push((s.t, s.t, s.mode.clone()));
                }
                None => out.push((s.t, s.t, s.mode.clone())),
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let Some(first) = self.samples.first() else {
            return Ok(());
        };
        let d = first.q.len();
        let n = first.lambda.len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("q_{i}")));
        header.extend((1..=d).map(|i| format!("qd_{i}")));
        header.push("mode".into());
        header.extend((1..=n).map(|i| format!("lambda_{i}")));
        writeln!(w, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![s.t.to_string()];
            row.extend(s.q.iter().map(f64::to_string));
            row.extend(s.qd.iter().map(f64::to_string));
            row.push(s.mode.to_field());
            row.extend(s.lambda.iter().map(f64::to_string));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// One JSON object per event: `{time, kind, index?, name?}` with
    /// one-based constraint indices.
    pub fn write_events_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            time: f64,
            kind: &'static str,
            #[serde(skip_serializing_if = "Option::is_none")]
            index: Option<usize>,
            #[serde(skip_serializing_if = "Option::is_none")]
            name: Option<&'a str>,
        }
        for e in &self.events {
            let (kind, index, name) = match &e.kind {
                EventKind::Activation(j) => ("activation", Some(j + 1), None),
                EventKind::Deactivation(j) => ("deactivation", Some(j + 1), None),
                EventKind::Grazing(j) => ("grazing", Some(j + 1), None),
                EventKind::Termination(n) => ("termination", None, Some(n.as_str())),
                EventKind::ZenoGuard => ("zeno_guard", None, None),
            };
            let line = Line { time: e.time, kind, index, name };
            writeln!(w, "{}", serde_json::to_string(&line).map_err(io::Error::other)?)?;
        }
        Ok(())
    }

    pub fn write_mode_timeline_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t_start,t_end,mode")?;
        for (a, b, m) in self.mode_timeline() {
            writeln!(w, "{a},{b},{}", m.to_field())?;
        }
        Ok(())
    }
}

/// Guard functions evaluated at one state.
#[derive(Clone, Debug, PartialEq)]
pub struct GuardValues {
    pub gaps: Vec<f64>,
    /// Padded multipliers of the state's mode.
    pub lambda: Vec<f64>,
    /// Termination guard values, `None` while disarmed.
    pub terminations: Vec<Option<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trigger {
    Activation(usize),
    Deactivation(usize),
    /// Index into the termination list.
    Termination(usize),
}

/// A sign change of one guard across a step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bracket {
    pub trigger: Trigger,
    pub before: f64,
    pub after: f64,
}

pub fn guard_values<S: MechanicalSystem>(
    sys: &S,
    s: &HybridState,
    input: &S::Input,
    terminations: &[Termination],
    events: &[Event],
) -> Result<GuardValues> {
    let (_, lambda) = contact_forces(sys, s, input)?;
    Ok(GuardValues {
        gaps: sys.constraints(&s.q).iter().copied().collect(),
        lambda: padded_multipliers(sys.num_constraints(), &s.mode, &lambda),
        terminations: terminations
            .iter()
            .map(|term| (term.armed)(events, &s.mode).then(|| (term.guard)(s)))
            .collect(),
    })
}

/// Reports the guards that changed sign between two states of `mode`.
pub fn detect_events(
    prev: &GuardValues,
    next: &GuardValues,
    mode: &ContactMode,
    terminations: &[Termination],
) -> Vec<Bracket> {
    let mut out = Vec::new();
    for (j, (&before, &after)) in prev.gaps.iter().zip(&next.gaps).enumerate() {
        // A released constraint that is still touching re-enters when its
        // gap starts to decrease.
        let sinking = before <= 0.0 && after < before;
        if !mode.contains(j) && (Crossing::Falling.brackets(before, after) || sinking) {
            out.push(Bracket { trigger: Trigger::Activation(j), before, after });
        }
    }
    for (j, (&before, &after)) in prev.lambda.iter().zip(&next.lambda).enumerate() {
        if mode.contains(j) && Crossing::Falling.brackets(before, after) {
            out.push(Bracket { trigger: Trigger::Deactivation(j), before, after });
        }
    }
    for (k, term) in terminations.iter().enumerate() {
        if let (Some(before), Some(after)) = (prev.terminations[k], next.terminations[k]) {
            if term.crossing.brackets(before, after) {
                out.push(Bracket { trigger: Trigger::Termination(k), before, after });
            }
        }
    }
    out
}

/// One RK4 step of length `h` with the mode held fixed, followed by
/// projection of position and velocity onto the active constraints.
pub fn step_fixed_mode<S: MechanicalSystem>(
    sys: &S,
    s: &HybridState,
    input: &S::Input,
    h: f64,
) -> Result<HybridState> {
    if h == 0.0 {
        return Ok(s.clone());
    }
    let accel = |q: &DVector<f64>, qd: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(constrained_accel(sys, q, qd, &s.mode, input, s.t)?.0)
    };
    let (q0, v0) = (&s.q, &s.qd);
    let a1 = accel(q0, v0)?;
    let (q1, v1) = (q0 + v0 * (0.5 * h), v0 + &a1 * (0.5 * h));
    let a2 = accel(&q1, &v1)?;
    let (q2, v2) = (q0 + &v1 * (0.5 * h), v0 + &a2 * (0.5 * h));
    let a3 = accel(&q2, &v2)?;
    let (q3, v3) = (q0 + &v2 * h, v0 + &a3 * h);
    let a4 = accel(&q3, &v3)?;
    let q = q0 + (v0 + &v1 * 2.0 + &v2 * 2.0 + &v3) * (h / 6.0);
    let qd = v0 + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);
    if q.iter().chain(qd.iter()).any(|x| !x.is_finite()) {
        return Err(Error::Model(format!("non-finite state after step at t = {}", s.t)));
    }
    let q = project_configuration(sys, &q, &s.mode)?;
    let qd = impact_map(sys, &q, &qd, &s.mode)?;
    Ok(HybridState::new(q, qd, s.mode.clone(), s.t + h))
}

/// Outcome of localizing one bracket.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Localized {
    /// Offset of the root from the start of the step.
    Root(f64),
    /// The sign change disappeared on re-integration.
    Lost,
}

fn trigger_value<S: MechanicalSystem>(
    sys: &S,
    s: &HybridState,
    input: &S::Input,
    trigger: Trigger,
    terminations: &[Termination],
) -> Result<f64> {
    Ok(match trigger {
        Trigger::Activation(j) => sys.constraints(&s.q)[j],
        Trigger::Deactivation(j) => {
            let (_, lambda) = contact_forces(sys, s, input)?;
            padded_multipliers(sys.num_constraints(), &s.mode, &lambda)[j]
        }
        Trigger::Termination(k) => (terminations[k].guard)(s),
    })
}

/// Bisects the step offset until the bracket is narrower than
/// `event_time_tol`, then places the root by linear interpolation inside
/// the final bracket.
pub fn localize_event<S: MechanicalSystem>(
    sys: &S,
    s_prev: &HybridState,
    input: &S::Input,
    h: f64,
    bracket: &Bracket,
    terminations: &[Termination],
    cfg: &FlowConfig,
) -> Result<Localized> {
    let crossing = match bracket.trigger {
        Trigger::Termination(k) => terminations[k].crossing,
        _ => Crossing::Falling,
    };
    let value = |tau: f64| -> Result<f64> {
        let s = step_fixed_mode(sys, s_prev, input, tau)?;
        trigger_value(sys, &s, input, bracket.trigger, terminations)
    };
    if let Trigger::Activation(_) = bracket.trigger {
        if bracket.before <= 0.0 {
            return Ok(Localized::Root(0.0));
        }
    }
    let (mut lo, mut hi) = (0.0, h);
    let (mut f_lo, mut f_hi) = (value(lo)?, value(hi)?);
    if crossing.crossed(f_lo) || !crossing.crossed(f_hi) {
        return Ok(Localized::Lost);
    }
    while hi - lo > cfg.event_time_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = value(mid)?;
        if crossing.crossed(f_mid) {
            hi = mid;
            f_hi = f_mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    let denom = f_lo - f_hi;
    let tau = if denom != 0.0 && denom.is_finite() {
        lo + (hi - lo) * (f_lo / denom).clamp(0.0, 1.0)
    } else {
        hi
    };
    Ok(Localized::Root(tau.max(f64::MIN_POSITIVE)))
}

fn sample_of(s: &HybridState, guards: &GuardValues) -> Sample {
    Sample {
        t: s.t,
        q: s.q.iter().copied().collect(),
        qd: s.qd.iter().copied().collect(),
        mode: s.mode.clone(),
        lambda: guards.lambda.clone(),
    }
}

fn push_sample(traj: &mut Trajectory, s: Sample) {
    match traj.samples.last_mut() {
        Some(last) if last.t >= s.t => *last = s,
        _ => traj.samples.push(s),
    }
}

fn check_gaps<S: MechanicalSystem>(sys: &S, s: &HybridState) -> Result<()> {
    for (index, &gap) in sys.constraints(&s.q).iter().enumerate() {
        if !s.mode.contains(index) && gap < -GAP_TOL {
            return Err(Error::Penetration { index, gap });
        }
    }
    Ok(())
}

/// Applies the jointly detected events at one instant. Returns the post
/// state, or `None` for the mode if a termination fired.
fn apply_events<S: MechanicalSystem, P: Fn(&ContactMode) -> S::Input>(
    sys: &S,
    pre: HybridState,
    group: &[Trigger],
    policy: &P,
    terminations: &[Termination],
    traj: &mut Trajectory,
) -> Result<(HybridState, Option<String>)> {
    let mut activations = Vec::new();
    let mut releases = Vec::new();
    let mut finished = None;
    for &trigger in group {
        match trigger {
            Trigger::Activation(j) => {
                let rate = (sys.constraint_jacobian(&pre.q) * &pre.qd)[j];
                if rate < 0.0 || sys.constraints(&pre.q)[j] <= 0.0 {
                    activations.push(j);
                } else {
                    warn!("constraint {} grazed at t = {}", j + 1, pre.t);
                    traj.events.push(Event {
                        time: pre.t,
                        kind: EventKind::Grazing(j),
                        pre_state: pre.clone(),
                        post_state: pre.clone(),
                    });
                }
            }
            Trigger::Deactivation(j) => releases.push(j),
            Trigger::Termination(k) => finished = Some(terminations[k].name.clone()),
        }
    }

    let mut post = pre.clone();
    if !activations.is_empty() {
        let mode = post.mode.union(&ContactMode::from_indices(activations.iter().copied()));
        post.q = project_configuration(sys, &post.q, &mode)?;
        post.qd = impact_map(sys, &post.q, &post.qd, &mode)?;
        post.mode = mode;
        for &j in &activations {
            traj.events.push(Event {
                time: pre.t,
                kind: EventKind::Activation(j),
                pre_state: pre.clone(),
                post_state: post.clone(),
            });
        }
    }

    // Release bracketed constraints, then any whose multiplier is negative in
    // the new mode, one at a time starting from the most negative.
    let mut queued = releases;
    loop {
        if !queued.is_empty() {
            let before = post.clone();
            post.mode = post.mode.without(&queued);
            for &j in &queued {
                traj.events.push(Event {
                    time: pre.t,
                    kind: EventKind::Deactivation(j),
                    pre_state: before.clone(),
                    post_state: post.clone(),
                });
            }
        }
        let (_, lambda) = contact_forces(sys, &post, &policy(&post.mode))?;
        let worst = post
            .mode
            .indices()
            .iter()
            .zip(lambda.iter())
            .filter(|(_, &l)| l < -RELEASE_TOL)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(&j, _)| j);
        match worst {
            Some(j) => queued = vec![j],
            None => break,
        }
    }
    Ok((post, finished))
}

/// Integrates from `x0` until the horizon or the first armed termination.
///
/// Deterministic: identical arguments give bit-identical trajectories.
pub fn flow<S, P>(
    sys: &S,
    x0: &HybridState,
    policy: P,
    cfg: &FlowConfig,
    terminations: &[Termination],
) -> Result<Trajectory>
where
    S: MechanicalSystem,
    P: Fn(&ContactMode) -> S::Input,
{
    cfg.validate()?;
    let implied = consistent_mode(sys, &x0.q, GAP_TOL)?;
    if implied != x0.mode {
        for &j in implied.indices() {
            // Touching but inactive constraints are allowed only when separating.
            if !x0.mode.contains(j) && (sys.constraint_jacobian(&x0.q) * &x0.qd)[j] < 0.0 {
                return Err(Error::Model(format!(
                    "initial mode {} inconsistent with configuration (implies {implied})",
                    x0.mode
                )));
            }
        }
        if x0.mode.indices().iter().any(|&j| !implied.contains(j)) {
            return Err(Error::Model(format!(
                "initial mode {} inconsistent with configuration (implies {implied})",
                x0.mode
            )));
        }
    }

    let end = x0.t + cfg.horizon_t;
    let mut traj = Trajectory::default();
    // A start in contact with a pulling multiplier is released at once.
    let (mut s, _) = apply_events(sys, x0.clone(), &[], &policy, terminations, &mut traj)?;
    let mut mode_changes = traj.events.len();
    let mut input = policy(&s.mode);
    let mut guards = guard_values(sys, &s, &input, terminations, &traj.events)?;
    traj.samples.push(sample_of(&s, &guards));

    while end - s.t > 1e-12 * end.abs().max(1.0) {
        let h = cfg.step_h.min(end - s.t);
        let next = step_fixed_mode(sys, &s, &input, h)?;
        let next_guards = guard_values(sys, &next, &input, terminations, &traj.events)?;
        let brackets = detect_events(&guards, &next_guards, &s.mode, terminations);
        if brackets.is_empty() {
            check_gaps(sys, &next)?;
            s = next;
            guards = next_guards;
            push_sample(&mut traj, sample_of(&s, &guards));
            continue;
        }

        let mut roots = Vec::with_capacity(brackets.len());
        for b in &brackets {
            match localize_event(sys, &s, &input, h, b, terminations, cfg)? {
                Localized::Root(tau) => roots.push((tau, b.trigger)),
                Localized::Lost => {
                    if let Trigger::Activation(j) | Trigger::Deactivation(j) = b.trigger {
                        warn!("lost bracket for constraint {} near t = {}", j + 1, s.t);
                        traj.events.push(Event {
                            time: s.t,
                            kind: EventKind::Grazing(j),
                            pre_state: s.clone(),
                            post_state: s.clone(),
                        });
                    }
                }
            }
        }
        if roots.is_empty() {
            check_gaps(sys, &next)?;
            s = next;
            guards = next_guards;
            push_sample(&mut traj, sample_of(&s, &guards));
            continue;
        }
        let earliest = roots.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
        let group: Vec<(f64, Trigger)> = roots
            .into_iter()
            .filter(|r| r.0 <= earliest + cfg.simultaneity_window)
            .collect();
        let tau = group.iter().map(|r| r.0).fold(0.0, f64::max);
        let triggers: Vec<Trigger> = group.iter().map(|r| r.1).collect();

        let pre = step_fixed_mode(sys, &s, &input, tau)?;
        let events_before = traj.events.len();
        let (post, finished) = apply_events(sys, pre, &triggers, &policy, terminations, &mut traj)?;
        mode_changes += traj.events[events_before..]
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Activation(_) | EventKind::Deactivation(_)))
            .count();

        input = policy(&post.mode);
        s = post;
        guards = guard_values(sys, &s, &input, terminations, &traj.events)?;
        push_sample(&mut traj, sample_of(&s, &guards));

        if let Some(name) = finished {
            traj.events.push(Event {
                time: s.t,
                kind: EventKind::Termination(name.clone()),
                pre_state: s.clone(),
                post_state: s.clone(),
            });
            traj.terminated_by = Some(name);
            return Ok(traj);
        }
        if mode_changes > cfg.max_events {
            traj.events.push(Event {
                time: s.t,
                kind: EventKind::ZenoGuard,
                pre_state: s.clone(),
                post_state: s.clone(),
            });
            return Err(Error::ZenoGuard {
                limit: cfg.max_events,
                trajectory: Box::new(traj),
            });
        }
    }
    Ok(traj)
}
