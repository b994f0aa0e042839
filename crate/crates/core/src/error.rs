use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid needs at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error("composite Simpson grid needs an odd point count, got {0}")]
    SimpsonParity(usize),

    #[error("sampled functions live on different grids")]
    GridMismatch,

    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("iterated integral order must be at least 1")]
    ZeroIntegralOrder,

    #[error("parse error at byte {position} in `{input}`: {message}")]
    Parse {
        input: String,
        position: usize,
        message: String,
    },

    #[error("division by zero evaluating `{expr}` at x = {x}")]
    DivisionByZero { expr: String, x: f64 },

    #[error("non-finite value evaluating `{expr}` at x = {x}")]
    NonFinite { expr: String, x: f64 },

    #[error("`{0}` is not differentiable in closed form (step with moving argument)")]
    NotDifferentiable(String),

    #[error("invalid coefficient spec: {0}")]
    InvalidSpec(String),

    #[error("q0 vanishes on the grid (min |q0| = {0:e})")]
    Q0Vanishes(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("derivative order {k} out of range, need k < n = {n}")]
    DerivativeOrder { k: usize, n: usize },

    #[error("operator form not usable here: {0}")]
    IneligibleForm(String),

    #[error("invalid boundary conditions: {0}")]
    InvalidBoundary(String),

    #[error("degenerate boundary conditions: rows {group} are linearly dependent")]
    DegenerateBoundaryConditions { group: &'static str },

    #[error("no right-end conditions (l = N); the boundary problem has no finite-rank part")]
    NoRightConditions,

    #[error(
        "0 is in the spectrum (condition number {condition:e}); apply shift() with e.g. a = {suggested_shift}"
    )]
    ZeroInSpectrum {
        condition: f64,
        suggested_shift: f64,
    },

    #[error("eigensolver failed to converge")]
    EigenSolver,

    #[error("requested {requested} root functions but only {available} are available")]
    BasisTooSmall { requested: usize, available: usize },

    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
