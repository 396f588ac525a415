use thiserror::Error;

use crate::flow::FlowTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: (h={h_left}, K={k_left}) vs (h={h_right}, K={k_right})")]
    GridMismatch {
        h_left: f64,
        k_left: usize,
        h_right: f64,
        k_right: usize,
    },

    #[error("state vector has {got} values, grid requires {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("singular tridiagonal system: pivot {pivot:e} at row {row}")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("time step failed ({reason}); retry with a smaller tau (tau = {tau})")]
    StepFailure { tau: f64, reason: String },

    #[error(
        "Newton iteration did not converge in {iterations} iterations \
         (last update {last_update:e}); retry with a smaller tau (tau = {tau})"
    )]
    NewtonNonconvergence {
        tau: f64,
        iterations: usize,
        last_update: f64,
    },

    #[error("degenerate state: squared L2 norm {l2_sq:e} (flow collapsed to zero)")]
    DegenerateState { l2_sq: f64 },

    #[error("state is not normalized: N_h = {l2_sq}")]
    NotNormalized { l2_sq: f64 },

    #[error("ground state iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("flow aborted at iteration {iteration}: {source}")]
    FlowAborted {
        iteration: usize,
        #[source]
        source: Box<Error>,
        trace: Box<FlowTrace>,
    },

    #[error("blow-up detected at t = {time}")]
    BlowUp { time: f64 },

    #[error("outside the coordinate chart: ||u||^2 = {l2_sq} >= 1")]
    OutOfChart { l2_sq: f64 },

    #[error("input is not orthogonal to the ground state: <u, eta> = {overlap:e}")]
    NotOrthogonal { overlap: f64 },

    #[error("dense eigensolve limited to K <= {max}, got K = {k}; use an iterative method")]
    ProblemTooLarge { k: usize, max: usize },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("insufficient data for fit: {usable} usable points, need at least {required}")]
    InsufficientData { usable: usize, required: usize },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
