use thiserror::Error;

use crate::flow::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("constraint Jacobian rows for mode {mode} are rank deficient")]
    SingularConstraint { mode: String },

    #[error("model error: {0}")]
    Model(String),

    #[error("constraint {index} penetrated: gap {gap:e} m")]
    Penetration { index: usize, gap: f64 },

    #[error("more than {limit} events before the horizon (Zeno guard)")]
    ZenoGuard {
        limit: usize,
        trajectory: Box<Trajectory>,
    },

    #[error("initial reaction forces are not all positive: {lambda:?}")]
    InfeasibleStart { lambda: Vec<f64> },

    #[error("termination '{name}' did not fire within the horizon of {horizon} s")]
    Horizon { name: String, horizon: f64 },

    #[error("cost returned a non-finite value {value} at {at}")]
    NonFiniteCost { at: f64, value: f64 },

    #[error("Hessian with respect to the input is singular (|det| = {det:e})")]
    SingularHessian { det: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}
