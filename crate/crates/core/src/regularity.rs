//! Finite-difference Bouligand derivatives, optimality and sensitivity
//! checks, curve classification, and the policy-gradient experiment.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::biped::{Maneuver, PolicyInputs};
use crate::error::{Error, Result};
use crate::optimizer::Problem;

/// Default first step of the one-sided ladder, relative to the argument scale.
pub const DEFAULT_H0: f64 = 1e-4;

fn scaled(h: f64, x: f64) -> f64 {
    h * x.abs().max(1.0)
}

fn finite(at: f64, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteCost { at, value })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BDerivEstimate {
    pub x: f64,
    pub direction: f64,
    pub value: f64,
    pub steps: Vec<f64>,
    /// Spread between the last two extrapolated values.
    pub residual: f64,
}

/// `Df(x; direction)` from one-sided differences on the ladder
/// `h0, h0/2, h0/4, h0/8`, extrapolated twice (first order, then second).
pub fn one_sided_derivative<F>(mut f: F, x: f64, direction: f64, h0: f64) -> Result<BDerivEstimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(direction == 1.0 || direction == -1.0) {
        return Err(Error::Config(format!("direction must be ±1, got {direction}")));
    }
    let f0 = finite(x, f(x)?)?;
    let steps: Vec<f64> = (0..4).map(|k| h0 / f64::from(1u32 << k)).collect();
    let mut d = Vec::with_capacity(4);
    for &h in &steps {
        let at = x + direction * h;
        d.push((finite(at, f(at)?)? - f0) / h);
    }
    let r1: Vec<f64> = d.windows(2).map(|w| 2.0 * w[1] - w[0]).collect();
    let r2: Vec<f64> = r1.windows(2).map(|w| (4.0 * w[1] - w[0]) / 3.0).collect();
    Ok(BDerivEstimate {
        x,
        direction,
        value: r2[1],
        steps,
        residual: (r2[1] - r2[0]).abs(),
    })
}

fn axpy(u: &[f64], t: f64, dir: &[f64]) -> Vec<f64> {
    u.iter().zip(dir).map(|(a, b)| a + t * b).collect()
}

/// `Dc(u; dir)` for a multivariate function.
pub fn directional_derivative<F>(c: &mut F, u: &[f64], dir: &[f64], h0: f64) -> Result<BDerivEstimate>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    one_sided_derivative(|t| c(&axpy(u, t, dir)), 0.0, 1.0, h0)
}

/// `±e_k` for `k < dim`.
pub fn coordinate_directions(dim: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * dim);
    for k in 0..dim {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; dim];
            v[k] = s;
            out.push(v);
        }
    }
    out
}

/// Coordinate directions plus the normalized diagonals (2-D only).
pub fn coordinate_and_diagonal_directions(dim: usize) -> Vec<Vec<f64>> {
    let mut out = coordinate_directions(dim);
    if dim == 2 {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for (a, b) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            out.push(vec![a * r, b * r]);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// The base point is too close to the input bounds to probe.
    Boundary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FirstOrderCheck {
    pub verdict: Verdict,
    /// `(direction, Dc(u*; direction))` for every probed direction.
    pub derivatives: Vec<(Vec<f64>, f64)>,
    /// The most negative direction when the check fails.
    pub witness: Option<(Vec<f64>, f64)>,
}

fn near_bounds(u: &[f64], bounds: Option<&[[f64; 2]]>, reach: f64) -> bool {
    bounds.is_some_and(|b| u.iter().zip(b).any(|(x, [lo, hi])| x - reach < *lo || x + reach > *hi))
}

/// Necessary condition at a candidate minimizer: every one-sided
/// directional derivative is at least `-tol`.
pub fn check_first_order<F>(
    mut c: F,
    u_star: &[f64],
    directions: &[Vec<f64>],
    tol: f64,
    bounds: Option<&[[f64; 2]]>,
) -> Result<FirstOrderCheck>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let scale = u_star.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let h0 = DEFAULT_H0 * scale;
    if near_bounds(u_star, bounds, h0) {
        return Ok(FirstOrderCheck { verdict: Verdict::Boundary, derivatives: vec![], witness: None });
    }
    let mut derivatives = Vec::with_capacity(directions.len());
    for dir in directions {
        let d = directional_derivative(&mut c, u_star, dir, h0)?;
        derivatives.push((dir.clone(), d.value));
    }
    let witness = derivatives
        .iter()
        .filter(|(_, d)| *d < -tol)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .cloned();
    let verdict = if witness.is_some() { Verdict::Fail } else { Verdict::Pass };
    Ok(FirstOrderCheck { verdict, derivatives, witness })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SecondOrderCheck {
    pub verdict: Verdict,
    /// `(direction, one-sided second derivative)` on the critical directions.
    pub critical: Vec<(Vec<f64>, f64)>,
}

/// One-sided second difference along `dir`, extrapolated once.
fn one_sided_second<F>(c: &mut F, u: &[f64], dir: &[f64], h: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let c0 = c(u)?;
    let mut s = [0.0; 2];
    for (k, hk) in [h, 0.5 * h].into_iter().enumerate() {
        let c1 = c(&axpy(u, hk, dir))?;
        let c2 = c(&axpy(u, 2.0 * hk, dir))?;
        s[k] = finite(hk, (c2 - 2.0 * c1 + c0) / (hk * hk))?;
    }
    Ok(2.0 * s[1] - s[0])
}

/// Sufficient condition: positive one-sided curvature along every
/// direction whose first-order term vanishes within `tol`. Directions with
/// a positive first-order term need nothing further.
pub fn check_second_order<F>(mut c: F, u_star: &[f64], directions: &[Vec<f64>], tol: f64) -> Result<SecondOrderCheck>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let scale = u_star.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut critical = Vec::new();
    for dir in directions {
        let first = directional_derivative(&mut c, u_star, dir, DEFAULT_H0 * scale)?;
        if first.value.abs() <= tol {
            let second = one_sided_second(&mut c, u_star, dir, 1e-3 * scale)?;
            critical.push((dir.clone(), second));
        }
    }
    let ok = critical.iter().all(|(_, s)| *s > tol);
    Ok(SecondOrderCheck { verdict: if ok { Verdict::Pass } else { Verdict::Fail }, critical })
}

/// First- and second-order derivative data of `c(x, u)` at `(x, u)`.
struct Blocks {
    d1: f64,
    grad_u: DVector<f64>,
    hess_uu: DMatrix<f64>,
}

fn unit(k: usize, dim: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[k] = 1.0;
    e
}

fn hessian_u<F>(c: &mut F, x: f64, u: &[f64], hu: f64) -> Result<DMatrix<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<f64>,
{
    let k = u.len();
    let c0 = c(x, u)?;
    let mut h = DMatrix::zeros(k, k);
    for i in 0..k {
        let ei = unit(i, k);
        let plus = c(x, &axpy(u, hu, &ei))?;
        let minus = c(x, &axpy(u, -hu, &ei))?;
        h[(i, i)] = (plus - 2.0 * c0 + minus) / (hu * hu);
        for j in 0..i {
            let ej = unit(j, k);
            let pp = c(x, &axpy(&axpy(u, hu, &ei), hu, &ej))?;
            let pm = c(x, &axpy(&axpy(u, hu, &ei), -hu, &ej))?;
            let mp = c(x, &axpy(&axpy(u, -hu, &ei), hu, &ej))?;
            let mm = c(x, &axpy(&axpy(u, -hu, &ei), -hu, &ej))?;
            let v = (pp - pm - mp + mm) / (4.0 * hu * hu);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteCost { at: x, value: f64::NAN });
    }
    Ok(h)
}

fn grad_u<F>(c: &mut F, x: f64, u: &[f64], hu: f64) -> Result<DVector<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<f64>,
{
    let k = u.len();
    let mut g = DVector::zeros(k);
    for i in 0..k {
        let ei = unit(i, k);
        g[i] = (c(x, &axpy(u, hu, &ei))? - c(x, &axpy(u, -hu, &ei))?) / (2.0 * hu);
    }
    Ok(g)
}

fn solve_hessian(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let det = h.determinant();
    if !(det.abs() >= 1e-10) {
        return Err(Error::SingularHessian { det });
    }
    h.clone().lu().solve(rhs).ok_or(Error::SingularHessian { det })
}

fn blocks_central<F>(c: &mut F, x: f64, u: &[f64]) -> Result<(Blocks, DVector<f64>)>
where
    F: FnMut(f64, &[f64]) -> Result<f64>,
{
    let hx = scaled(DEFAULT_H0, x);
    let hu = scaled(DEFAULT_H0, u.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let d1 = (c(x + hx, u)? - c(x - hx, u)?) / (2.0 * hx);
    let g_plus = grad_u(c, x + hx, u, hu)?;
    let g_minus = grad_u(c, x - hx, u, hu)?;
    let d12 = (g_plus - g_minus) / (2.0 * hx);
    let blocks = Blocks { d1, grad_u: grad_u(c, x, u, hu)?, hess_uu: hessian_u(c, x, u, hu)? };
    Ok((blocks, d12))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sensitivities {
    /// Derivative (or B-derivative along the chosen side) of the policy.
    pub d_policy: Vec<f64>,
    pub d_value: f64,
}

/// `Dπ = −D₂²c⁻¹ D₁₂c` and `Dν = D₁c + D₂c·Dπ` from central differences.
pub fn smooth_sensitivities<F>(mut c: F, x: f64, u_star: &[f64]) -> Result<Sensitivities>
where
    F: FnMut(f64, &[f64]) -> Result<f64>,
{
    let (b, d12) = blocks_central(&mut c, x, u_star)?;
    let dpi = -solve_hessian(&b.hess_uu, &d12)?;
    let d_value = b.d1 + b.grad_u.dot(&dpi);
    Ok(Sensitivities { d_policy: dpi.iter().copied().collect(), d_value })
}

/// One-sided analogue of [`smooth_sensitivities`] on the side `v = ±1`:
/// the state differences are taken along `v` only, and the value
/// derivative uses the one-sided input derivative along `Dπ(x; v)`.
pub fn pc_sensitivities<F>(mut c: F, x: f64, u_star: &[f64], v: f64) -> Result<Sensitivities>
where
    F: FnMut(f64, &[f64]) -> Result<f64>,
{
    if !(v == 1.0 || v == -1.0) {
        return Err(Error::Config(format!("direction must be ±1, got {v}")));
    }
    let hx = scaled(DEFAULT_H0, x);
    let hu = scaled(DEFAULT_H0, u_star.iter().fold(0.0f64, |m, w| m.max(w.abs())));
    let hess = hessian_u(&mut c, x, u_star, hu)?;
    // D₁₂c(x, u; v) from a Richardson pair of one-sided state steps.
    let g0 = grad_u(&mut c, x, u_star, hu)?;
    let g1 = grad_u(&mut c, x + v * hx, u_star, hu)?;
    let g2 = grad_u(&mut c, x + v * 0.5 * hx, u_star, hu)?;
    let d12 = (&g2 - &g0) * (4.0 / hx) - (&g1 - &g0) * (1.0 / hx);
    let dpi = -solve_hessian(&hess, &d12)?;

    let d1 = one_sided_derivative(|t| c(t, u_star), x, v, hx)?.value;
    let norm = dpi.norm();
    let d2 = if norm == 0.0 {
        0.0
    } else {
        let dir: Vec<f64> = dpi.iter().map(|w| w / norm).collect();
        let step = scaled(DEFAULT_H0, u_star.iter().fold(0.0f64, |m, w| m.max(w.abs())));
        norm * directional_derivative(&mut |u: &[f64]| c(x, u), u_star, &dir, step)?.value
    };
    Ok(Sensitivities { d_policy: dpi.iter().copied().collect(), d_value: d1 + d2 })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityResidual {
    pub direction: f64,
    /// One-sided difference of the value function itself.
    pub direct: f64,
    /// `D₁c(x,π(x);v) + D₂c(x,π(x);Dπ(x;v))`.
    pub predicted: f64,
    pub residual: f64,
    /// Residual relative to `max(|direct|, |predicted|, floor)`.
    pub scaled: f64,
}

/// Compares a one-sided difference of `ν` with the chain-rule prediction.
/// `nu` must re-optimize (or evaluate the exact optimum) at its argument.
pub fn verify_value_identity<C, V>(
    c: C,
    mut nu: V,
    x: f64,
    u_star: &[f64],
    v: f64,
    floor: f64,
) -> Result<IdentityResidual>
where
    C: FnMut(f64, &[f64]) -> Result<f64>,
    V: FnMut(f64) -> Result<f64>,
{
    let predicted = pc_sensitivities(c, x, u_star, v)?.d_value;
    let direct = one_sided_derivative(&mut nu, x, v, scaled(1e-3, x))?.value;
    let residual = (direct - predicted).abs();
    let scale = direct.abs().max(predicted.abs()).max(floor);
    Ok(IdentityResidual { direction: v, direct, predicted, residual, scaled: residual / scale })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PointClass {
    Smooth,
    Kink,
    Jump,
    /// Grid ends and points next to missing samples.
    Unknown,
}

impl PointClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointClass::Smooth => "smooth",
            PointClass::Kink => "kink",
            PointClass::Jump => "jump",
            PointClass::Unknown => "unknown",
        }
    }
}

/// Classification thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Jump if the span across a point exceeds this many typical increments.
    pub kappa_jump: f64,
    /// Kink if the one-sided slopes differ by more than this fraction of the
    /// local slope scale.
    pub kappa_kink: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { kappa_jump: 20.0, kappa_kink: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointReport {
    pub x: f64,
    pub class: PointClass,
    /// One-sided secant slopes on the fine grid.
    pub d_plus: f64,
    pub d_minus: f64,
    /// Signed span `y(x+) − y(x−)` across the point on the fine grid.
    pub jump_estimate: f64,
    pub coarse: PointClass,
    pub fine: PointClass,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityReport {
    pub thresholds: Thresholds,
    pub coarse_count: usize,
    pub fine_count: usize,
    pub points: Vec<PointReport>,
}

impl RegularityReport {
    pub fn at(&self, x: f64) -> Option<&PointReport> {
        self.points.iter().min_by(|a, b| (a.x - x).abs().total_cmp(&(b.x - x).abs()))
    }

    /// Points other than smooth and unknown ones.
    pub fn irregular(&self) -> Vec<&PointReport> {
        self.points.iter().filter(|p| matches!(p.class, PointClass::Kink | PointClass::Jump)).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "theta0,class,d_plus,d_minus,jump_estimate")?;
        for p in &self.points {
            writeln!(w, "{},{},{},{},{}", p.x, p.class.as_str(), p.d_plus, p.d_minus, p.jump_estimate)?;
        }
        Ok(())
    }
}

/// Per-resolution test results at one point.
struct Local {
    class: PointClass,
    span: f64,
    d_plus: f64,
    d_minus: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

struct Resolution<'a> {
    y: &'a [f64],
    pitch: f64,
    increment_scale: f64,
    slope_scale: f64,
}

impl<'a> Resolution<'a> {
    fn new(x: &'a [f64], y: &'a [f64]) -> Self {
        let pitch = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
        let incs: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]).abs()).filter(|d| d.is_finite()).collect();
        let finite: Vec<f64> = y.iter().copied().filter(|v| v.is_finite()).collect();
        let range = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - finite.iter().copied().fold(f64::INFINITY, f64::min);
        let range = if range.is_finite() { range } else { 0.0 };
        let increment_scale = median(incs).max(1e-9 * range);
        Resolution { y, pitch, increment_scale, slope_scale: range / (x[x.len() - 1] - x[0]) }
    }

    fn local(&self, i: usize, t: &Thresholds) -> Local {
        let y = self.y;
        if i == 0 || i + 1 >= y.len() || !(y[i - 1].is_finite() && y[i].is_finite() && y[i + 1].is_finite()) {
            return Local { class: PointClass::Unknown, span: f64::NAN, d_plus: f64::NAN, d_minus: f64::NAN };
        }
        let d_plus = (y[i + 1] - y[i]) / self.pitch;
        let d_minus = (y[i] - y[i - 1]) / self.pitch;
        let span = y[i + 1] - y[i - 1];
        let class = if span.abs() > t.kappa_jump * self.increment_scale && self.increment_scale > 0.0 {
            PointClass::Jump
        } else {
            let scale = d_plus.abs().max(d_minus.abs()).max(self.slope_scale);
            if scale > 0.0 && (d_plus - d_minus).abs() > t.kappa_kink * scale {
                PointClass::Kink
            } else {
                PointClass::Smooth
            }
        };
        Local { class, span, d_plus, d_minus }
    }
}

/// Classifies every coarse grid point using the coarse samples and a 4×
/// refinement of the same interval. A point is a jump only if the span
/// across it is large at both resolutions and does not shrink with the
/// pitch; it is a kink only if the one-sided slopes differ at both.
pub fn classify_curve(coarse: &[(f64, f64)], fine: &[(f64, f64)], t: Thresholds) -> Result<RegularityReport> {
    let n = coarse.len();
    if n < 3 || fine.len() != 4 * (n - 1) + 1 {
        return Err(Error::GridMismatch(format!(
            "fine grid must have 4(N−1)+1 = {} points for N = {n}, got {}",
            4 * n.saturating_sub(1) + 1,
            fine.len()
        )));
    }
    let span = coarse[n - 1].0 - coarse[0].0;
    for (i, &(x, _)) in coarse.iter().enumerate() {
        if (fine[4 * i].0 - x).abs() > 1e-9 * span.abs().max(1.0) {
            return Err(Error::GridMismatch(format!("fine grid does not contain coarse point {x}")));
        }
    }
    let (xc, yc): (Vec<f64>, Vec<f64>) = coarse.iter().copied().unzip();
    let (xf, yf): (Vec<f64>, Vec<f64>) = fine.iter().copied().unzip();
    let rc = Resolution::new(&xc, &yc);
    let rf = Resolution::new(&xf, &yf);

    let points = (0..n)
        .map(|i| {
            let c = rc.local(i, &t);
            let f = rf.local(4 * i, &t);
            let class = match (c.class, f.class) {
                (PointClass::Unknown, _) | (_, PointClass::Unknown) => PointClass::Unknown,
                (PointClass::Jump, PointClass::Jump) if f.span.abs() > 0.5 * c.span.abs() => PointClass::Jump,
                (PointClass::Jump | PointClass::Kink, PointClass::Jump | PointClass::Kink) => {
                    if (c.d_plus - c.d_minus).abs() > t.kappa_kink * c.d_plus.abs().max(c.d_minus.abs()).max(rc.slope_scale)
                        && (f.d_plus - f.d_minus).abs()
                            > t.kappa_kink * f.d_plus.abs().max(f.d_minus.abs()).max(rf.slope_scale)
                    {
                        PointClass::Kink
                    } else {
                        PointClass::Smooth
                    }
                }
                _ => PointClass::Smooth,
            };
            PointReport {
                x: xc[i],
                class,
                d_plus: f.d_plus,
                d_minus: f.d_minus,
                jump_estimate: f.span,
                coarse: c.class,
                fine: f.class,
            }
        })
        .collect();
    Ok(RegularityReport { thresholds: t, coarse_count: n, fine_count: fine.len(), points })
}

/// Largest absolute difference between adjacent samples.
pub fn max_increment(samples: &[(f64, f64)]) -> f64 {
    samples.windows(2).map(|w| (w[1].1 - w[0].1).abs()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GradEstimator {
    /// One-sided directional derivatives along `±e_k`.
    TrueB,
    /// Symmetric differences of width `h_s`.
    Smoothed { h_s: f64 },
    /// Antithetic Gaussian two-point estimator with `samples` draws of scale `h_s`.
    Sampled { h_s: f64, samples: usize, seed: u64 },
}

impl GradEstimator {
    pub fn name(&self) -> &'static str {
        match self {
            GradEstimator::TrueB => "true_b",
            GradEstimator::Smoothed { .. } => "smoothed",
            GradEstimator::Sampled { .. } => "sampled",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PgStep {
    pub policy: Vec<f64>,
    pub next: Vec<f64>,
    /// Directional derivatives (true-B) or the gradient estimate.
    pub estimate: Vec<f64>,
    pub step_norm: f64,
}

/// One steepest-descent step of length `alpha` on `nu`.
///
/// True-B: the step is zero when no unit coordinate direction decreases
/// `nu` by more than `tol`; otherwise it follows the steepest one.
/// Estimators: the step is `−α ĝ/‖ĝ‖`, or zero when `‖ĝ‖ ≤ tol`.
pub fn pg_update<F>(mut nu: F, policy: &[f64], alpha: f64, estimator: &GradEstimator, tol: f64) -> Result<PgStep>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let k = policy.len();
    let scale = policy.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut next = policy.to_vec();
    let estimate = match estimator {
        GradEstimator::TrueB => {
            let dirs = coordinate_directions(k);
            let mut derivs = Vec::with_capacity(dirs.len());
            for d in &dirs {
                derivs.push(directional_derivative(&mut nu, policy, d, DEFAULT_H0 * scale)?.value);
            }
            let (best, &dmin) = derivs.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("nonempty");
            if dmin < -tol {
                next = axpy(policy, alpha, &dirs[best]);
            }
            derivs
        }
        GradEstimator::Smoothed { h_s } => {
            let mut g = vec![0.0; k];
            for (i, gi) in g.iter_mut().enumerate() {
                let e = unit(i, k);
                *gi = (nu(&axpy(policy, *h_s, &e))? - nu(&axpy(policy, -*h_s, &e))?) / (2.0 * h_s);
            }
            g
        }
        GradEstimator::Sampled { h_s, samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut g = vec![0.0; k];
            for _ in 0..*samples {
                let eps: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
                let diff = nu(&axpy(policy, *h_s, &eps))? - nu(&axpy(policy, -*h_s, &eps))?;
                for (gi, e) in g.iter_mut().zip(&eps) {
                    *gi += diff * e / (2.0 * h_s * *samples as f64);
                }
            }
            g
        }
    };
    if !matches!(estimator, GradEstimator::TrueB) {
        let norm = estimate.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::NonFiniteCost { at: policy[0], value: norm });
        }
        if norm > tol {
            next = axpy(policy, -alpha / norm, &estimate);
        }
    }
    let step_norm = next.iter().zip(policy).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok(PgStep { policy: policy.to_vec(), next, estimate, step_norm })
}

/// Stream seed for task `index` of a batch driven by `master`.
pub fn task_seed(master: u64, index: u64) -> u64 {
    // SplitMix64 finalizer over the pair.
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PgTrial {
    pub estimator: GradEstimator,
    pub alpha: f64,
    pub step: PgStep,
    /// `‖π⁺ − π*‖ / α`.
    pub relative_step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PgReport {
    pub maneuver: Maneuver,
    pub theta0: f64,
    /// Optimized channels: `(u1, u2)` for touchdown, `(u12)` for liftoff.
    pub optimal_policy: Vec<f64>,
    pub optimal_value: f64,
    pub tol: f64,
    pub trials: Vec<PgTrial>,
}

impl PgReport {
    pub fn trial(&self, estimator: &str, alpha: f64) -> Option<&PgTrial> {
        self.trials.iter().find(|t| t.estimator.name() == estimator && t.alpha == alpha)
    }
}

/// The optimized input channels of a maneuver as a vector.
pub fn policy_channels(kind: Maneuver, u: &PolicyInputs) -> Vec<f64> {
    match kind {
        Maneuver::Touchdown => vec![u.u1, u.u2],
        Maneuver::Liftoff => vec![u.u12],
    }
}

fn inputs_from(pb: &Problem, channels: &[f64]) -> PolicyInputs {
    match pb.maneuver {
        Maneuver::Touchdown => PolicyInputs::new(channels[0], channels[1], 0.0),
        Maneuver::Liftoff => pb.liftoff_inputs(channels[0]),
    }
}

/// Cost at `theta0` as a function of the optimized input channels.
pub fn policy_cost(pb: &Problem, theta0: f64) -> impl FnMut(&[f64]) -> Result<f64> + '_ {
    move |channels: &[f64]| pb.cost(theta0, &inputs_from(pb, channels))
}

/// Optimizes at `theta0`, then takes one policy-gradient step from the
/// optimum with every estimator and step size.
pub fn pg_divergence_experiment(
    pb: &Problem,
    theta0: f64,
    alphas: &[f64],
    estimators: &[GradEstimator],
    tol: f64,
) -> Result<PgReport> {
    let sol = pb.optimize(theta0, None)?;
    let optimal_policy = policy_channels(pb.maneuver, &sol.inputs);
    let mut trials = Vec::new();
    for est in estimators {
        for &alpha in alphas {
            let step = pg_update(policy_cost(pb, theta0), &optimal_policy, alpha, est, tol)?;
            let relative_step = step.step_norm / alpha;
            trials.push(PgTrial { estimator: est.clone(), alpha, step, relative_step });
        }
    }
    Ok(PgReport { maneuver: pb.maneuver, theta0, optimal_policy, optimal_value: sol.value, tol, trials })
}
