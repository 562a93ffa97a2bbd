use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parametric coordinate {value} outside [0, 1]")]
    Domain { value: f64 },

    #[error("derivative order {order} exceeds degree {degree}")]
    Order { order: usize, degree: usize },

    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),

    #[error("index {index} out of range (size {size})")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("singular geometry map: |det J| = {det:e} at {point:?}")]
    SingularGeometry { det: f64, point: Vec<f64> },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("time pencil cannot be diagonalized: {0}")]
    DefectivePencil(String),

    #[error("numerical consistency check failed: {0}")]
    NumericalConsistency(String),

    #[error("stabilization construction failed: constraint residual {residual:e}")]
    StabilizationConstruction { residual: f64 },

    #[error("negative curvature detected in conjugate gradient at iteration {iteration}")]
    NegativeCurvature { iteration: usize },

    #[error("{solver} did not converge in {iterations} iterations (last residual {last:e})")]
    LinearNonConvergence {
        solver: &'static str,
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("fixed-point iteration did not converge in {iterations} iterations (last increment {last:e})")]
    NonConvergence {
        iterations: usize,
        last: f64,
        increments: Vec<f64>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
