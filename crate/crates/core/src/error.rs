use std::path::PathBuf;

use crate::geometry::ParameterPoint;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter point (r = {r}, theta = {theta}): both semi-axes squared must be positive")]
    InvalidParameter { r: f64, theta: f64 },

    #[error("background box must be square and non-degenerate, got [{x0}, {x1}] x [{y0}, {y1}]")]
    NonSquareBox { x0: f64, x1: f64, y0: f64, y1: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cut element {element} has no boundary quadrature rule")]
    MissingBoundaryRule { element: usize },

    #[error("active block is not positive definite at {mu} (loss of coercivity)")]
    NotPositiveDefinite { mu: ParameterPoint },

    #[error("empty active set at {mu}")]
    EmptyActiveSet { mu: ParameterPoint },

    #[error("snapshot matrix is identically zero")]
    ZeroSnapshots,

    #[error("all eigenvalues are zero")]
    ZeroSpectrum,

    #[error("DEIM interpolation matrix is ill-conditioned (condition number {condition:.3e} at step {step})")]
    IllConditionedDeim { step: usize, condition: f64 },

    #[error("reduced system is singular at {mu} with n = {n}")]
    SingularReducedSystem { mu: ParameterPoint, n: usize },

    #[error("mode count {n} outside 1..={max}")]
    ModeCount { n: usize, max: usize },

    #[error("relative error undefined: reference vector is zero")]
    ZeroReference,

    #[error("fit needs at least 2 usable points, got {0}")]
    TooFewPoints(usize),

    #[error("invariant violated at {mu}, n = {n}: {what}")]
    Invariant { mu: ParameterPoint, n: usize, what: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("artifact {path}: {what}")]
    Artifact { path: PathBuf, what: String },

    #[error("stale artifacts: manifest hash {found} does not match config hash {expected}")]
    StaleArtifacts { expected: String, found: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Error {
    let context = context.into();
    move |source| Error::Io { context, source }
}
