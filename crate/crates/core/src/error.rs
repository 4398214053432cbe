use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("erosion by {margin} leaves an empty window")]
    EmptyErosion { margin: f64 },
    #[error("point ({x}, {y}) lies outside the observation window")]
    PointOutsideWindow { x: f64, y: f64 },
    #[error("duplicated point ({x}, {y})")]
    DuplicatePoint { x: f64, y: f64 },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("query radius {requested} exceeds index radius {radius}")]
    RadiusExceedsIndex { requested: f64, radius: f64 },
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("function is not finite at r = {r}")]
    NonFiniteFunction { r: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no data points inside the eroded window")]
    NoDataPoints,
    #[error("fit did not converge")]
    NotConverged,
    #[error("fitted interaction vanishes at observed distance {r}")]
    SingularPhi { r: f64 },
    #[error("sensitivity matrix is not positive definite")]
    SingularSensitivity,
    #[error("true function has zero L2 norm")]
    ZeroTrueNorm,
    #[error("r grid maximum {r_max} must be below half the shorter window side {limit}")]
    GridTooLarge { r_max: f64, limit: f64 },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
