use thiserror::Error;

/// Errors shared by all tubekit modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("parameter out of regime: {what} (crossover at {crossover})")]
    RegimeViolation { what: String, crossover: f64 },

    #[error("unsupported dimension {dim}: {why}")]
    UnsupportedDimension { dim: usize, why: String },

    #[error("empty set: {0}")]
    EmptySet(String),

    #[error("set is not convex (fill ratio {fill_ratio:.4})")]
    NonConvex { fill_ratio: f64 },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error(
        "tolerance not achieved: estimate {estimate}, achieved relative error {achieved}, requested {requested}"
    )]
    ToleranceNotAchieved {
        estimate: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("no convex core found above threshold; best candidate ratios ({purity:.4}, {coverage:.4})")]
    CoreNotFound { purity: f64, coverage: f64 },

    #[error("schema violation at {location}: {message}")]
    Schema { location: String, message: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code used by the CLI error JSON.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "geom.dimension_mismatch",
            Error::InvalidGeometry(_) => "geom.invalid",
            Error::RegimeViolation { .. } => "param.regime",
            Error::UnsupportedDimension { .. } => "param.unsupported_dimension",
            Error::EmptySet(_) => "set.empty",
            Error::NonConvex { .. } => "set.non_convex",
            Error::PreconditionFailed(_) => "op.precondition",
            Error::ToleranceNotAchieved { .. } => "est.tolerance",
            Error::CoreNotFound { .. } => "search.core_not_found",
            Error::Schema { .. } => "schema.violation",
            Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => "io.not_found",
            Error::Io(_) => "io.error",
            Error::Json(_) => "schema.json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
