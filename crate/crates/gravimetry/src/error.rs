//! Error type shared by all modules.

use thiserror::Error;

/// Everything that can go wrong across the toolkit.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A value violated a domain precondition (non-positive length,
    /// ratio outside its open interval, and so on).
    #[error("domain error: {0}")]
    Domain(String),

    /// A model body is not strictly buried, so a surface point could lie
    /// inside it.
    #[error("body {index} is not buried: top {top:.4} km is at or above the surface")]
    NotBuried {
        /// Index of the offending body in its model list.
        index: usize,
        /// Signed depth of the body top, `z0 - c`.
        top: f64,
    },

    /// Two peaks passed to a pair operation coincide.
    #[error("degenerate peak pair: peaks coincide at ({x:.3}, {y:.3})")]
    DegeneratePair {
        /// Shared x coordinate, km.
        x: f64,
        /// Shared y coordinate, km.
        y: f64,
    },

    /// A probe pair contradicts the homogeneous-sphere model
    /// (`v^(2/3) <= psi^2` leaves no real depth ratio).
    #[error("inconsistent probe pair: v={v:.6}, psi={psi:.6}")]
    InconsistentProbe {
        /// Intensity ratio of the two probes.
        v: f64,
        /// Offset ratio delta/s.
        psi: f64,
    },

    /// No valid probe pair survived filtering; the caller should fall back
    /// to its depth hint.
    #[error("depth/mass estimation failed: {0}")]
    EstimationFailed(String),

    /// Unknown synthetic scenario name.
    #[error("unknown scenario {name:?}; available: {available}")]
    UnknownScenario {
        /// The requested name.
        name: String,
        /// Comma-separated list of valid names.
        available: String,
    },

    /// A constraint box is malformed or infeasible.
    #[error("infeasible parameter box: {0}")]
    InfeasibleBox(String),
}
