//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by chain construction, potential-theory evaluation, the
/// branching engine, and suite configuration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter is outside its mathematical domain (degree, probability,
    /// pgf argument, and similar).
    #[error("domain error: {0}")]
    Domain(String),

    /// A state does not belong to the state space of the chain it was used
    /// with (bad word letters, mixed chain kinds, ...).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A configuration value is syntactically valid but violates a
    /// constraint required by an operation or suite.
    #[error("configuration error: {0}")]
    Config(String),

    /// The total particle count of a branching step would exceed the
    /// configured cap.
    #[error(
        "population overflow at generation {generation}: \
         {attempted} particles exceeds cap {cap}"
    )]
    PopulationOverflow {
        generation: u32,
        attempted: u128,
        cap: u64,
    },

    /// An iterative numerical procedure failed to reach its tolerance.
    #[error("convergence failure in {what}: residual {residual:e} after {iterations} iterations")]
    Convergence {
        what: String,
        residual: f64,
        iterations: u64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
