//! Error and terminal-condition types.

use thiserror::Error;

/// Errors produced by construction and solver operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter violated one of the admissibility constraints.
    #[error("invalid model parameter: {0}")]
    InvalidParams(String),

    /// Invalid grid or discretization sizes.
    #[error("invalid discretization: {0}")]
    InvalidDiscretization(String),

    /// Derivative order outside the supported set.
    #[error("unsupported derivative order {got} (expected one of {expected})")]
    UnsupportedOrder { got: usize, expected: &'static str },

    /// Newton iteration for a quadrature node failed to converge. This
    /// signals an implementation bug, not bad user input.
    #[error("Newton iteration for Gauss node {index} of rule N={n} did not converge")]
    QuadratureDivergence { n: usize, index: usize },

    /// A linear system was exactly singular.
    #[error("singular linear system ({0})")]
    SingularSystem(String),

    /// Time march ended early; carries the machine-readable reason.
    #[error("solver terminated: {0}")]
    Terminal(TerminalReason),

    /// Error grids cannot be compared (reference stride does not divide).
    #[error("incommensurate grids: {0}")]
    IncommensurateGrids(String),

    /// Invalid error/rate inputs (nonpositive error, equal levels).
    #[error("invalid convergence-rate input: {0}")]
    InvalidRateInput(String),
}

/// Why a time march stopped before reaching the final time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TerminalReason {
    /// The radius update produced a nonpositive radius.
    RadiusCollapse { step: usize, radius: f64 },
    /// The collocation matrix was singular or its 1-norm condition estimate
    /// exceeded the solver limit.
    IllConditioned { step: usize, condition: f64 },
}

impl std::fmt::Display for TerminalReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TerminalReason::RadiusCollapse { step, radius } => {
                write!(f, "radius collapsed to {radius:.3e} at step {step}")
            }
            TerminalReason::IllConditioned { step, condition } => {
                write!(
                    f,
                    "collocation system ill-conditioned at step {step} (estimate {condition:.3e})"
                )
            }
        }
    }
}
