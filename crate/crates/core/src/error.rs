use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex subset is empty")]
    EmptyBlock,

    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("vertex {0} has zero degree")]
    ZeroDegree(usize),

    #[error("dense decomposition limited to n <= {cap}, got n = {n}")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("inner product matrix is not the block diagonal of the variation operator")]
    WrongInnerProduct,

    #[error("kernel {0} has no polynomial form")]
    NotPolynomial(String),

    #[error("filter context does not match the spec mode ({0})")]
    ModeMismatch(&'static str),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("solver stalled at relative residual {residual:e} (tolerance {tolerance:e})")]
    NotConverged { residual: f64, tolerance: f64 },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("ply: {0}")]
    Ply(String),

    #[error("matrix market: {0}")]
    MatrixMarket(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing level data: {0}")]
    MissingLevel(String),

    #[error("level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn at_level(self, level: usize) -> Self {
        Error::AtLevel {
            level,
            source: Box::new(self),
        }
    }

    /// Strips any level annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtLevel { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(
            self.root(),
            Error::Io(_) | Error::Json(_) | Error::Ply(_) | Error::MatrixMarket(_) | Error::MissingLevel(_)
        )
    }

    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::NotPositiveDefinite | Error::NotConverged { .. } | Error::Eigen(_) | Error::ZeroDegree(_)
        )
    }
}
