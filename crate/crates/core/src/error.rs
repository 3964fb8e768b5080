use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("boundary is self-intersecting: curves {first} and {second}")]
    SelfIntersecting { first: usize, second: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("coefficient tensor is not symmetric at ({x}, {y}): asymmetry {asymmetry:e}")]
    NonSymmetric { x: f64, y: f64, asymmetry: f64 },

    #[error("quadrature did not converge: estimated error {estimate:e} after {intervals} subintervals")]
    QuadratureNonConvergence { estimate: f64, intervals: usize },

    #[error("sample is not on the boundary: {0}")]
    OffBoundary(String),

    #[error("grading degenerates layer {layer}: minimum angle {angle_deg:.2} deg below {threshold_deg:.2} deg")]
    GradingDegenerate {
        layer: usize,
        angle_deg: f64,
        threshold_deg: f64,
    },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh has no provenance record; it cannot be regenerated")]
    ProvenanceMissing,

    #[error("unsupported template for this operation: {0}")]
    UnsupportedTemplate(String),

    #[error("quadrature point coincides with a singular point in element {0}")]
    SingularQuadraturePoint(usize),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("conjugate gradient did not converge: {iterations} iterations, relative residual {residual:e}")]
    CgNonConvergence { iterations: usize, residual: f64 },

    #[error("indefinite pivot {pivot:e} at row {row}")]
    IndefinitePivot { row: usize, pivot: f64 },

    #[error("unknown manufactured problem '{0}'")]
    UnknownProblem(String),

    #[error("eigen iteration did not converge after {iterations} iterations (residual {residual:e})")]
    EigenNonConvergence { iterations: usize, residual: f64 },

    #[error("weighted mass matrix is not positive definite")]
    IndefiniteMass,

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
