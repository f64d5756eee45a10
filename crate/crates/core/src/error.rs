use thiserror::Error;

use crate::fiber::FiberFailure;
use crate::minimizer::SolveFailure;
use crate::spectral::Representation;

/// Structural and numerical failures raised by the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: (n = {left_n}, l = {left_l}) vs (n = {right_n}, l = {right_l})")]
    GridMismatch {
        left_n: usize,
        left_l: f64,
        right_n: usize,
        right_l: f64,
    },

    #[error("representation mismatch: expected {expected:?}, found {found:?}")]
    RepresentationMismatch {
        expected: Representation,
        found: Representation,
    },

    #[error("unsupported Sobolev order s = {0} (supported: -1/2, 1/2, 1)")]
    UnsupportedSobolevOrder(f64),

    #[error("mass parameter m = {0} rejected: need m ∈ (0,1]")]
    InvalidMassParameter(f64),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("stale fiber maximizer: {0}")]
    StaleMaximizer(String),

    #[error(transparent)]
    Fiber(Box<FiberFailure>),

    #[error(transparent)]
    Solve(Box<SolveFailure>),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the failure is an iteration that did not converge (as opposed
    /// to bad input or I/O).
    pub fn is_non_convergence(&self) -> bool {
        matches!(self, Error::Fiber(_) | Error::Solve(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
