use thiserror::Error;

/// Errors produced anywhere in the discretization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid mesh request: {0}")]
    Mesh(String),

    #[error("unknown interface tag `{0}`")]
    UnknownTag(String),

    #[error("invalid barycentric point {0:?}")]
    Barycentric([f64; 3]),

    #[error("unsupported quadrature degree {0} (at most 10)")]
    QuadratureDegree(usize),

    #[error("degenerate triangle (det J = {0:e})")]
    DegenerateTriangle(f64),

    #[error("incompatible element choice: {0}")]
    Elements(String),

    #[error("field {field} has no support on triangle {triangle}")]
    OutsideRegion { field: &'static str, triangle: usize },

    #[error("incompatible form: {0}")]
    Form(String),

    #[error("matrix index ({row}, {col}) out of range for a {nrows}x{ncols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("solve residual {residual:e} exceeds {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("rate fit needs at least two entries, got {0}")]
    TooFewEntries(usize),

    #[error("meshes are not compatible for transfer: {0}")]
    NonNested(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
