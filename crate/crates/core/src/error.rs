use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid probability vector: {0}")]
    InvalidProbabilityVector(String),

    #[error("invalid mixture weights: {0}")]
    InvalidWeights(String),

    #[error("components {first} and {second} are identical (L-inf distance {distance:e})")]
    DuplicateComponents {
        first: usize,
        second: usize,
        distance: f64,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid split {split} for a tensor of order {order}")]
    InvalidSplit { split: usize, order: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error(
        "rank deficient: {wanted} eigenvalues requested but only {available} exceed the floor"
    )]
    RankDeficient { wanted: usize, available: usize },

    #[error("moment of order {order} needs groups of size >= {order}, got {group_size}")]
    OrderTooLarge { order: usize, group_size: usize },

    #[error("eigenvector {index} is orthogonal to every probe tried")]
    DegenerateEigenvector { index: usize },

    #[error("component estimate {index} vanished after sign correction and clipping")]
    DegenerateComponent { index: usize },

    #[error("component estimate {index} has a negative entry {value:e} and clipping is disabled")]
    NegativeComponent { index: usize, value: f64 },

    #[error("spectral gap {gap:e} between component norms is below {tol:e}")]
    EqualNorms { gap: f64, tol: f64 },

    #[error("null space has dimension {dim}, expected exactly one")]
    NullSpaceDimension { dim: usize },

    #[error("{m} components exceeds the supported maximum of {max}")]
    TooManyComponents { m: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
