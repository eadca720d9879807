//! Error type shared by every module of the laboratory.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    /// Invalid parameter value (nonpositive variance, bad weights, ...).
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Fields or grids that must match do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A grid is too coarse to resolve the requested object.
    #[error("resolution guard: {0}")]
    Resolution(String),

    /// Mass reached the edge of the computational box during propagation.
    #[error("boundary escape: edge mass {mass:.3e} exceeds {limit:.3e} at t={t}")]
    BoundaryEscape { mass: f64, limit: f64, t: f64 },

    /// Point lies on (or too close to) the singular set.
    #[error("singularity: dist(x,S) = {dist:.3e} at {context}")]
    Singularity { dist: f64, context: String },

    /// Two routes that must agree did not.
    #[error("transform consistency: {0}")]
    TransformConsistency(String),

    /// Unit-mass precondition violated.
    #[error("mass mismatch: {0}")]
    MassMismatch(String),

    /// A conservation or bound audit failed; names the worst offender.
    #[error("audit failure: {0}")]
    AuditFailure(String),

    /// Discretization lattice too coarse; carries a suggested refinement.
    #[error("lattice too coarse: {0}")]
    LatticeTooCoarse(String),

    /// Unsupported operator tag or catalog name.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
