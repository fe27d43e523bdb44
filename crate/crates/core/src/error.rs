use thiserror::Error;

use crate::particle::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation was called with arguments outside its domain
    /// (wrong geometry, out-of-range site, negative time, ...).
    #[error("misuse: {0}")]
    Misuse(String),

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("offspring law does not sum to one (sum = {sum})")]
    NotNormalized { sum: f64 },

    #[error("offspring law is not critical (mean = {mean})")]
    NotCritical { mean: f64 },

    #[error("invalid offspring law: {0}")]
    InvalidLaw(String),

    /// Green function at infinity requested for a recurrent walk.
    #[error("green function diverges in dimension {dim} (walk is recurrent)")]
    Divergent { dim: usize },

    #[error("unstable step: kappa * dt = {product} must be below 1")]
    Stability { product: f64 },

    /// The simulation hit its event cap. The partial trajectory is kept
    /// for diagnostics.
    #[error("event cap of {cap} events exceeded at t = {}", .partial.final_state.clock())]
    EventCapExceeded { cap: u64, partial: Box<Trajectory> },

    /// Configuration failed validation; one message per offending field.
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("csv schema mismatch, missing columns: {}", .0.join(", "))]
    Schema(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn misuse(msg: impl Into<String>) -> Self {
        Error::Misuse(msg.into())
    }
}
