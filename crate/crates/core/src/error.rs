use std::path::PathBuf;

use thiserror::Error;

/// Location and value of the smallest density sample that fell below the floor.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorViolation {
    pub t: f64,
    pub index: usize,
    pub position: [f64; 3],
    pub value: f64,
    pub epsilon: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid norm specification: {0}")]
    InvalidNorm(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("helmholtz coefficient must be non-negative, got {0}")]
    NegativeAlpha(f64),

    #[error(
        "density-floor violation at t = {:.6e}: rho = {:.6e} < epsilon = {:.6e} at node {} (x = {:?})",
        .0.t, .0.value, .0.epsilon, .0.index, .0.position
    )]
    DensityFloor(FloorViolation),

    #[error("blow-up: non-finite values after t = {last_valid_t:.6e}")]
    BlowUp { last_valid_t: f64 },

    #[error("time step {dt:.3e} at dt_min still violates the CFL bound {required:.3e}")]
    CflViolation { dt: f64, required: f64 },

    #[error("variable-density pressure solve stalled after {iterations} iterations (residual {residual:.3e})")]
    PressureSolve { iterations: usize, residual: f64 },

    #[error("ODE tolerance {tol:.3e} not achievable: {reason}")]
    Tolerance { tol: f64, reason: String },

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("stability experiment: {0}")]
    Experiment(String),

    #[error("config errors:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("corrupt snapshot {path}: {reason}")]
    CorruptSnapshot { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Physics events end a run early; everything else is a usage or programming error.
    pub fn is_physics_event(&self) -> bool {
        matches!(
            self,
            Error::DensityFloor(_) | Error::BlowUp { .. } | Error::CflViolation { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
