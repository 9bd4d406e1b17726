use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {n} outside supported range 1..={max}")]
    Dimension { n: u32, max: u32 },

    #[error("distance parameter {0} outside (0, 1/2]")]
    Epsilon(f64),

    #[error("sigma {0} outside (0, 1]")]
    Sigma(f64),

    #[error("average sensitivity must be positive, got {0}")]
    Sensitivity(f64),

    #[error("point {bits:#b} is not a vertex of the {n}-dimensional hypercube")]
    PointOutOfRange { bits: u64, n: u32 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: u32, got: u32 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point is not a member of the middle-layer set")]
    NotInSet,

    #[error("malformed routing instance: {0}")]
    MalformedInstance(String),

    #[error("routing found {found} vertex-disjoint paths, expected {requested}")]
    RoutingFailed { found: usize, requested: usize },

    #[error("invalid matching: {0}")]
    InvalidMatching(String),

    #[error("invalid blue instance: {0}")]
    InvalidBlueInstance(String),

    #[error("truth-table format: {0}")]
    Format(String),

    #[error("unknown function family `{0}`")]
    UnknownFamily(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
