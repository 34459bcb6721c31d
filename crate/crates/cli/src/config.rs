use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unilateral::biped::{BipedParams, CostParams, Maneuver, PolicyInputs};
use unilateral::flow::FlowConfig;
use unilateral::grid::GridSpec;
use unilateral::optimizer::{OptimizationConfig, Problem};
use unilateral::regularity::Thresholds;
use unilateral::{Error, Result};

/// Settings of the policy-gradient experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PgConfig {
    pub theta0s: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Width of the smoothed and sampled estimators.
    pub h_s: f64,
    pub samples: usize,
    /// Stationarity deadband: derivative estimates below this count as zero.
    pub tol: f64,
}

impl Default for PgConfig {
    fn default() -> Self {
        PgConfig {
            theta0s: vec![-0.15, -0.05, 0.0, 0.05, 0.15],
            alphas: vec![1e-2, 1e-3],
            h_s: 0.05,
            samples: 64,
            tol: 1e-4,
        }
    }
}

/// Everything one CLI run needs. Unset `cost` and `inputs` resolve to the
/// maneuver defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub maneuver: Maneuver,
    pub params: BipedParams,
    pub cost: Option<CostParams>,
    pub flow: FlowConfig,
    pub optimizer: OptimizationConfig,
    pub thresholds: Thresholds,
    pub grid: GridSpec,
    /// Initial pitch for `simulate`.
    pub theta0: f64,
    /// Constant inputs for `simulate` and `sweep`.
    pub inputs: Option<PolicyInputs>,
    pub pg: PgConfig,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Worker threads; all cores when unset.
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            maneuver: Maneuver::Touchdown,
            params: BipedParams::default(),
            cost: None,
            flow: FlowConfig::default(),
            optimizer: OptimizationConfig::default(),
            thresholds: Thresholds::default(),
            grid: GridSpec { lo: -0.3, hi: 0.3, count: 241 },
            theta0: 0.1,
            inputs: None,
            pg: PgConfig::default(),
            out_dir: PathBuf::from("out"),
            seed: 0,
            jobs: None,
        }
    }
}

/// Fixed inputs used by sweeps when none are configured.
pub fn default_inputs(kind: Maneuver) -> PolicyInputs {
    match kind {
        Maneuver::Touchdown => PolicyInputs::new(5.0, 2.0, 0.0),
        Maneuver::Liftoff => PolicyInputs::new(1.0, 15.0, 0.0),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Fills maneuver defaults and checks every section.
    pub fn resolve(mut self) -> Result<Self> {
        self.cost.get_or_insert_with(|| CostParams::default_for(self.maneuver));
        self.inputs.get_or_insert_with(|| default_inputs(self.maneuver));
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let as_config = |e: Error| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        };
        self.problem().map_err(as_config)?;
        self.grid.validate()?;
        if !self.theta0.is_finite() {
            return Err(Error::Config("theta0 must be finite".into()));
        }
        if self.inputs.iter().any(|u| ![u.u1, u.u2, u.u12].iter().all(|x| x.is_finite())) {
            return Err(Error::Config("inputs must be finite".into()));
        }
        let t = &self.thresholds;
        if !(t.kappa_jump > 0.0 && t.kappa_kink > 0.0) {
            return Err(Error::Config("thresholds must be positive".into()));
        }
        let pg = &self.pg;
        if pg.alphas.iter().any(|a| !(a.is_finite() && *a > 0.0)) || !(pg.h_s > 0.0) || pg.samples == 0 {
            return Err(Error::Config("pg needs positive alphas, h_s and samples".into()));
        }
        if pg.theta0s.iter().any(|x| !x.is_finite()) || !(pg.tol >= 0.0) {
            return Err(Error::Config("pg theta0s must be finite and tol non-negative".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<Problem> {
        Problem::new(
            self.maneuver,
            self.params.clone(),
            self.cost.clone().unwrap_or_else(|| CostParams::default_for(self.maneuver)),
            self.flow.clone(),
            self.optimizer.clone(),
        )
    }

    pub fn inputs(&self) -> PolicyInputs {
        self.inputs.unwrap_or_else(|| default_inputs(self.maneuver))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_named() {
        let e = RunConfig::from_json(r#"{"grid": {"lo": 0, "hi": 1, "count": 3}, "stepsize": 1}"#).unwrap_err();
        assert!(e.to_string().contains("stepsize"), "{e}");
        let e = RunConfig::from_json(r#"{"flow": {"step": 1e-3}}"#).unwrap_err();
        assert!(e.to_string().contains("step"), "{e}");
    }

    #[test]
    fn resolves_maneuver_defaults() {
        let c = RunConfig::from_json(r#"{"maneuver": "liftoff"}"#).unwrap().resolve().unwrap();
        assert_eq!(c.inputs, Some(PolicyInputs::new(1.0, 15.0, 0.0)));
        assert_eq!(c.cost, Some(CostParams::default_for(Maneuver::Liftoff)));
        let again = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_invalid_sections() {
        let bad = [
            r#"{"params": {"m": -1}}"#,
            r#"{"flow": {"step_h": 0}}"#,
            r#"{"grid": {"lo": 1, "hi": 0, "count": 5}}"#,
            r#"{"pg": {"alphas": [0]}}"#,
            r#"{"jobs": 0}"#,
        ];
        for text in bad {
            let e = RunConfig::from_json(text).and_then(RunConfig::resolve).unwrap_err();
            assert!(matches!(e, Error::Config(_)), "{text}: {e}");
        }
    }
}
