//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CombError {
    /// Bad input data: violated invariants, mismatched list lengths, etc.
    #[error("validation error: {0}")]
    Validation(String),

    /// Operator/state dimensions disagree.
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    /// Index outside the valid range.
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    /// Adaptive integrator could not continue (step-size underflow).
    #[error("integration failure at t = {t_last} ns: {reason}")]
    IntegrationFailure { t_last: f64, reason: String },

    /// Steady-state (or other iterative) search did not converge.
    #[error("no convergence within t_end = {t_end} ns (last residual {residual:.3e})")]
    NonConvergence { t_end: f64, residual: f64 },

    /// A fit could not be carried out at all (as opposed to a
    /// returned `FitResult` with `converged = false`).
    #[error("fit error: {0}")]
    Fit(String),

    /// Requested operating point cannot be reached.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Exact-propagator oracle refused an over-large problem.
    #[error("oracle cap exceeded: dim^2 = {dim_sq} > {cap}")]
    OracleCap { dim_sq: usize, cap: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl CombError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CombError::Validation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, CombError>;
