use thiserror::Error;

/// Errors raised by the geometry, system and lab layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate body: {0}")]
    DegenerateBody(String),

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("matrix norm {norm} exceeds the supported bound {bound}")]
    NormTooLarge { norm: f64, bound: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("invalid time: {0}")]
    InvalidTime(String),

    #[error("time resolution: {0}")]
    TimeResolution(String),

    #[error("quadrature stall after {doublings} panel doublings (last relative change {change:e})")]
    QuadratureStall { doublings: usize, change: f64 },

    #[error("system is not controllable (Kalman rank {rank} < {n})")]
    NotControllable { rank: usize, n: usize },

    #[error("ill-conditioned transform: condition number {0:e}")]
    IllConditioned(f64),

    #[error("missing Taylor data: {0}")]
    MissingTaylor(String),

    #[error("genericity failure: filtration dimensions {dims:?} do not reach 0")]
    Genericity { dims: Vec<usize> },

    #[error("splitting failure: {0}")]
    SplittingFailure(String),

    #[error("degenerate limit body: {0}")]
    DegenerateLimitBody(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unknown builtin system `{name}`; available: {available}")]
    UnknownBuiltin { name: String, available: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
