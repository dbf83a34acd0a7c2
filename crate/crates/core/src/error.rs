use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The finite-difference stencil around `point` would leave the chart box.
    #[error("point {point:?} is too close to the chart boundary (stencil reach {reach})")]
    Boundary { point: Vec<f64>, reach: f64 },

    /// A flow trajectory left the chart box.
    #[error("flow left the chart box at t = {time}")]
    FlowEscape { time: f64 },

    /// A path vertex was pushed outside the chart box during minimization.
    #[error("path minimization left the chart box near {point:?}")]
    PathEscape { point: Vec<f64> },

    #[error("convexity violated at {point:?}: margin {margin}")]
    ConvexityViolation { point: Vec<f64>, margin: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid convex body: {0}")]
    InvalidBody(String),

    #[error("origin is not interior to the recentered body (min gauge {min_gauge})")]
    DegenerateBetterment { min_gauge: f64 },

    #[error("metric is not positive-definite at {point:?}")]
    IndefiniteMetric { point: Vec<f64> },

    #[error("degenerate plane: relative Gram determinant {gram}")]
    DegeneratePlane { gram: f64 },

    #[error("underdetermined residual system: {points} sample points for {columns} coefficients")]
    Underdetermined { points: usize, columns: usize },

    #[error("map is not locally invertible at {point:?}")]
    InvalidMap { point: Vec<f64> },

    /// A nullspace basis field failed the finite almost-isometry check.
    #[error("basis field {field} failed cross-validation: max T-difference {diff:e} > {tolerance:e}")]
    Inconsistency {
        field: usize,
        diff: f64,
        tolerance: f64,
    },

    #[error("gallery construction invalid: {0}")]
    ConstructionInvalid(String),

    #[error("csv export failed: {0}")]
    Csv(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
