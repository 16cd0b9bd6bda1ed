use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input violates a documented precondition (bad parameter, out of range argument).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A function was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Internal consistency check failed (e.g. H(u) significantly negative on the critical set).
    #[error("internal consistency error: {0}")]
    Consistency(String),

    /// A root bracket did not contain a sign change.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// An off-critical trajectory ran into the sonic singularity.
    #[error("sonic blow-up: off-critical data cannot cross (x1 = {x1}, u = {u}, E = {e}, first-integral defect = {defect:e})")]
    SonicBlowUp { x1: f64, u: f64, e: f64, defect: f64 },

    /// The adaptive integrator could not continue.
    #[error("integrator failure at t = {t}: {reason}")]
    Integrator { t: f64, reason: String },

    /// A profile does not cross the sonic speed.
    #[error("no sonic crossing")]
    NoSonicCrossing,

    /// A requested location lies outside the sampled range.
    #[error("position {x} outside profile range [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },

    /// Root finding failed.
    #[error("root finding failed: {0}")]
    RootFinding(String),

    /// Nonlinear iteration diverged.
    #[error("iteration diverged after {iterations} iterations (residual {residual:e})")]
    Diverged { iterations: usize, residual: f64 },

    /// Nonlinear iteration did not reach the requested tolerance.
    #[error("iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    /// The assembled linear system is singular.
    #[error("singular linear system: {reason}")]
    Singular {
        reason: String,
        near_null: Vec<f64>,
    },

    /// A wedge angle beyond detachment was requested.
    #[error("detached: no attached shock state (theta_w = {theta_w}, theta_d = {theta_d})")]
    Detached { theta_w: f64, theta_d: f64 },

    /// Malformed text input (CSV).
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
