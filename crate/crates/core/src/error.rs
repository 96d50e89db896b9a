//! Error taxonomy shared by the library and the command-line front end.
//!
//! Variants are grouped by how a batch run should react to them: invalid
//! inputs are rejected before any computation starts, infeasible control
//! targets are a distinct planning failure, and numerical failures abort a
//! run that was already underway.

use thiserror::Error;

/// Errors produced anywhere in the simulation pipeline.
#[derive(Debug, Clone, Error)]
pub enum SimError {
    /// An input (config key, model parameter, schedule entry) failed
    /// validation. `field` names the offending entry so batch tooling can
    /// point at it directly.
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },

    /// A pulse-train design target cannot be reached under the stated
    /// amplitude/width/duration constraints. Carries the largest phase the
    /// constraints do allow, so callers can report how far off the target is.
    #[error(
        "phase target {target} rad is unreachable under the given constraints; \
         maximal reachable phase is {max_reachable} rad"
    )]
    InfeasibleTarget { target: f64, max_reachable: f64 },

    /// Numerical failure during propagation, quadrature, or linear algebra.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl SimError {
    /// Convenience constructor for validation failures.
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        SimError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit status used by the command-line front end:
    /// 2 for rejected inputs, 3 for infeasible control targets, 1 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Invalid { .. } => 2,
            SimError::InfeasibleTarget { .. } => 3,
            SimError::Numerical(_) => 1,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, SimError>;
