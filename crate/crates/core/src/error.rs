use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix of side {side} does not match subsystem dimensions {dims:?}")]
    ShapeMismatch { dims: Vec<usize>, side: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("subsystem index {index} out of range for {count} subsystems")]
    SubsystemOutOfRange { index: usize, count: usize },

    #[error("matrix is not Hermitian (max |M - M^dag| = {deviation:e}, tolerance {tolerance:e})")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("matrix is not a density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("operator is not unitary (max |U^dag U - I| = {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dense dimension {dim} exceeds the memory cap of {cap}")]
    MemoryCap { dim: usize, cap: usize },

    #[error("postselection succeeded with probability {0:e}; result is degenerate")]
    DegeneratePostselection(f64),

    #[error("malformed matrix data: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
