//! Mechanical systems subject to unilateral constraints `a(q) >= 0`.
//!
//! In contact mode `J` the continuous dynamics are
//!
//! ```text
//! M(q) q̈ = f_J(q, q̇, u) + c(q, q̇) q̇ + Da_J(q)ᵀ λ_J
//! Da_J(q) q̈ + (d/dt Da_J) q̇ = 0
//! ```
//!
//! and constraint activation resets velocities through a plastic impact.

use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gap tolerance (m) for mode membership.
pub const GAP_TOL: f64 = 1e-8;

/// A sorted, duplicate-free set of active constraint indices.
///
/// Indices are zero-based internally; `Display` and the CSV field form use
/// one-based indices, so the first constraint prints as `1`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ContactMode(Vec<usize>);

impl ContactMode {
    pub fn empty() -> Self {
        ContactMode(Vec::new())
    }

    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        ContactMode(v)
    }

    /// All `n` constraints active.
    pub fn full(n: usize) -> Self {
        ContactMode((0..n).collect())
    }

    /// Builds a mode and checks every index is below `n`.
    pub fn checked(indices: impl IntoIterator<Item = usize>, n: usize) -> Result<Self> {
        let mode = Self::from_indices(indices);
        if let Some(&j) = mode.0.iter().find(|&&j| j >= n) {
            return Err(Error::Model(format!(
                "constraint index {j} out of range for {n} constraints"
            )));
        }
        Ok(mode)
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn union(&self, other: &ContactMode) -> ContactMode {
        Self::from_indices(self.0.iter().chain(other.0.iter()).copied())
    }

    pub fn without(&self, removed: &[usize]) -> ContactMode {
        ContactMode(self.0.iter().copied().filter(|j| !removed.contains(j)).collect())
    }

    /// Semicolon-joined one-based indices, empty for the aerial mode.
    pub fn to_field(&self) -> String {
        self.0
            .iter()
            .map(|j| (j + 1).to_string())
            .collect::<Vec<_>>()
            .join(";")
    }
}

impl fmt::Display for ContactMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.to_field().replace(';', ","))
    }
}

/// Configuration, velocity, active mode and time.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridState {
    pub q: DVector<f64>,
    pub qd: DVector<f64>,
    pub mode: ContactMode,
    pub t: f64,
}

impl HybridState {
    pub fn new(q: DVector<f64>, qd: DVector<f64>, mode: ContactMode, t: f64) -> Self {
        HybridState { q, qd, mode, t }
    }
}

/// The model callbacks of a mechanical system subject to unilateral constraints.
///
/// `Input` is whatever the effort map consumes; the effort map also receives
/// the active mode so inputs can be gated by contact state.
pub trait MechanicalSystem {
    type Input;

    /// Configuration dimension `d`.
    fn dof(&self) -> usize;

    /// Number of unilateral constraints `n`.
    fn num_constraints(&self) -> usize;

    fn mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64>;

    fn effort(
        &self,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        mode: &ContactMode,
        input: &Self::Input,
    ) -> DVector<f64>;

    /// Coriolis matrix; zero unless overridden.
    fn coriolis(&self, _q: &DVector<f64>, _qd: &DVector<f64>) -> DMatrix<f64> {
        let d = self.dof();
        DMatrix::zeros(d, d)
    }

    /// Signed gaps `a(q)`.
    fn constraints(&self, q: &DVector<f64>) -> DVector<f64>;

    /// `Da(q)`, an `n × d` matrix.
    fn constraint_jacobian(&self, q: &DVector<f64>) -> DMatrix<f64>;

    /// Curvature term `(d/dt Da(q)) q̇` of all `n` constraints.
    ///
    /// The default is a central difference of the Jacobian along `q̇`.
    fn constraint_curvature(&self, q: &DVector<f64>, qd: &DVector<f64>) -> DVector<f64> {
        let eps = 1e-6 / qd.norm().max(1.0);
        let fwd = self.constraint_jacobian(&(q + qd * eps));
        let bwd = self.constraint_jacobian(&(q - qd * eps));
        (fwd - bwd) / (2.0 * eps) * qd
    }
}

fn rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |r, c| m[(idx[r], c)])
}

fn entries(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&j| v[j]))
}

/// Cholesky factor of the mass matrix after checking symmetry.
pub(crate) fn factor_mass(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let n = m.nrows();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::Model("mass matrix is not symmetric".into()));
            }
        }
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Model("mass matrix has non-finite entries".into()));
    }
    Cholesky::new(m.clone()).ok_or_else(|| Error::Model("mass matrix is not positive definite".into()))
}

/// Factors the Delassus matrix `Da M⁻¹ Daᵀ`, rejecting rank-deficient rows.
fn factor_delassus(
    chol_m: &Cholesky<f64, Dyn>,
    da: &DMatrix<f64>,
    mode: &ContactMode,
) -> Result<(DMatrix<f64>, Cholesky<f64, Dyn>)> {
    let minv_dat = chol_m.solve(&da.transpose());
    let g = da * &minv_dat;
    let singular = || Error::SingularConstraint {
        mode: mode.to_string(),
    };
    let chol = Cholesky::new(g.clone()).ok_or_else(singular)?;
    let l = chol.l_dirty();
    let diag: Vec<f64> = (0..g.nrows()).map(|i| l[(i, i)] * l[(i, i)]).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 1e-12 * max) {
        return Err(singular());
    }
    Ok((minv_dat, chol))
}

/// Accelerations and reaction forces in the mode of `s`.
///
/// Solves the block system through the Cholesky factors of `M` and of the
/// Delassus matrix (a block LDLᵀ of the KKT matrix). `λ` is returned in the
/// order of `s.mode.indices()`.
pub fn contact_forces<S: MechanicalSystem>(
    sys: &S,
    s: &HybridState,
    input: &S::Input,
) -> Result<(DVector<f64>, DVector<f64>)> {
    constrained_accel(sys, &s.q, &s.qd, &s.mode, input, s.t)
}

pub(crate) fn constrained_accel<S: MechanicalSystem>(
    sys: &S,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    mode: &ContactMode,
    input: &S::Input,
    t: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let chol_m = factor_mass(&sys.mass_matrix(q))?;
    let mut f = sys.effort(q, qd, mode, input);
    f.gemv(1.0, &sys.coriolis(q, qd), qd, 1.0);
    if f.iter().any(|x| !x.is_finite()) {
        return Err(Error::Model(format!("non-finite effort at t = {t}")));
    }
    let free = chol_m.solve(&f);
    if mode.is_empty() {
        return Ok((free, DVector::zeros(0)));
    }
    let idx = mode.indices();
    let da = rows(&sys.constraint_jacobian(q), idx);
    let curv = entries(&sys.constraint_curvature(q, qd), idx);
    let (minv_dat, chol_g) = factor_delassus(&chol_m, &da, mode)?;
    let lambda = chol_g.solve(&(-curv - &da * &free));
    let qdd = free + minv_dat * &lambda;
    Ok((qdd, lambda))
}

/// Reaction forces padded to all `n` constraints (zero where inactive).
pub fn padded_multipliers(n: usize, mode: &ContactMode, lambda: &DVector<f64>) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (k, &j) in mode.indices().iter().enumerate() {
        out[j] = lambda[k];
    }
    out
}

/// Projects `qd` onto the null space of `Da_J` in the kinetic-energy metric.
fn project_velocity<S: MechanicalSystem>(
    sys: &S,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    mode: &ContactMode,
) -> Result<DVector<f64>> {
    if mode.is_empty() {
        return Ok(qd.clone());
    }
    let chol_m = factor_mass(&sys.mass_matrix(q))?;
    let da = rows(&sys.constraint_jacobian(q), mode.indices());
    let (minv_dat, chol_g) = factor_delassus(&chol_m, &da, mode)?;
    Ok(qd - minv_dat * chol_g.solve(&(&da * qd)))
}

/// Plastic impact: the post-impact velocity is the closest velocity, in the
/// kinetic-energy metric, satisfying `Da_J q̇⁺ = 0`.
pub fn impact_map<S: MechanicalSystem>(
    sys: &S,
    q: &DVector<f64>,
    qd_minus: &DVector<f64>,
    new_mode: &ContactMode,
) -> Result<DVector<f64>> {
    project_velocity(sys, q, qd_minus, new_mode)
}

/// Newton projection of `q` onto `a_J(q) = 0`.
pub(crate) fn project_configuration<S: MechanicalSystem>(
    sys: &S,
    q: &DVector<f64>,
    mode: &ContactMode,
) -> Result<DVector<f64>> {
    if mode.is_empty() {
        return Ok(q.clone());
    }
    let idx = mode.indices();
    let mut q = q.clone();
    for _ in 0..8 {
        let gap = entries(&sys.constraints(&q), idx);
        if gap.amax() <= 1e-13 {
            break;
        }
        let chol_m = factor_mass(&sys.mass_matrix(&q))?;
        let da = rows(&sys.constraint_jacobian(&q), idx);
        let (minv_dat, chol_g) = factor_delassus(&chol_m, &da, mode)?;
        q -= minv_dat * chol_g.solve(&gap);
    }
    Ok(q)
}

/// Mode implied by the configuration: `{j : a_j(q) <= tol}`.
pub fn consistent_mode<S: MechanicalSystem>(
    sys: &S,
    q: &DVector<f64>,
    tol: f64,
) -> Result<ContactMode> {
    let a = sys.constraints(q);
    if let Some((index, &gap)) = a.iter().enumerate().find(|(_, &g)| g < -tol) {
        return Err(Error::Penetration { index, gap });
    }
    Ok(ContactMode::from_indices(
        a.iter().enumerate().filter(|(_, &g)| g <= tol).map(|(j, _)| j),
    ))
}

/// Kinetic energy `½ q̇ᵀ M q̇`.
pub fn kinetic_energy<S: MechanicalSystem>(sys: &S, q: &DVector<f64>, qd: &DVector<f64>) -> f64 {
    0.5 * qd.dot(&(sys.mass_matrix(q) * qd))
}

/// Checks the model invariants at `q`: symmetric positive-definite mass
/// matrix, full-rank constraint rows for every mode with at most `d`
/// members, and agreement of `Da` with a central difference of `a`.
pub fn check_model<S: MechanicalSystem>(sys: &S, q: &DVector<f64>) -> Result<()> {
    let d = sys.dof();
    let n = sys.num_constraints();
    if q.len() != d {
        return Err(Error::Model(format!("configuration has length {} != {d}", q.len())));
    }
    let chol_m = factor_mass(&sys.mass_matrix(q))?;
    let da = sys.constraint_jacobian(q);
    if da.shape() != (n, d) {
        return Err(Error::Model(format!("constraint Jacobian has shape {:?}", da.shape())));
    }
    for bits in 1usize..(1 << n) {
        let mode = ContactMode::from_indices((0..n).filter(|j| bits & (1 << j) != 0));
        if mode.len() <= d {
            factor_delassus(&chol_m, &rows(&da, mode.indices()), &mode)?;
        }
    }
    let h = 1e-6;
    for k in 0..d {
        let mut qp = q.clone();
        let mut qm = q.clone();
        qp[k] += h;
        qm[k] -= h;
        let fd = (sys.constraints(&qp) - sys.constraints(&qm)) / (2.0 * h);
        for j in 0..n {
            let exact = da[(j, k)];
            if (fd[j] - exact).abs() > 1e-6 * exact.abs().max(1.0) {
                return Err(Error::Model(format!(
                    "Da[{j},{k}] = {exact} disagrees with finite difference {}",
                    fd[j]
                )));
            }
        }
    }
    Ok(())
}
