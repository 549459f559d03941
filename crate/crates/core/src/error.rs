use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("prefractal depth {depth} exceeds the maximum of {max}")]
    DepthOverflow { depth: usize, max: usize },

    #[error("inconsistent slot accounting: {0}")]
    InconsistentSlots(String),

    #[error("polynomial degree {degree} exceeds the {region} moment table (max degree {max})")]
    DegreeExceedsTable {
        degree: usize,
        max: usize,
        region: String,
    },

    #[error("meshes are not nested: {0}")]
    NotNested(String),

    #[error("matrix is not positive definite: {0}")]
    Indefinite(String),

    #[error("{method} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh validation failed: {0}")]
    MeshValidation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for solver-side failures (indefinite systems, stalled iterations).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Indefinite(_) | Error::NonConvergence { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
