use thiserror::Error;

/// Errors surfaced by the geometry kernels and the solver.
#[derive(Error, Debug)]
pub enum ChError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("boundary-point: {0}")]
    BoundaryPoint(String),

    #[error("eigen-fail: no convergence, max residual {max_residual:.3e}")]
    EigenFail { max_residual: f64 },

    #[error("wrong-type: {0}")]
    WrongType(String),

    #[error("no-convergence after {sweeps} sweeps, last displacement {displacement:.3e}")]
    NoConvergence { sweeps: usize, displacement: f64 },

    #[error("boundary-drift: vertex {vertex} has |<v,v>| = {norm:.3e} after normalization")]
    BoundaryDrift { vertex: usize, norm: f64 },

    #[error("unsupported surface (genus {genus}, punctures {punctures}); built-ins: (2,0), (1,1), (0,3), (0,4), (1,2)")]
    UnsupportedSurface { genus: usize, punctures: usize },

    #[error("degenerate lattice: generators are R-linearly dependent")]
    DegenerateLattice,

    #[error("nothing to double: no hyperbolic peripheral image")]
    NothingToDouble,

    #[error("resolution too coarse: {0}")]
    ResolutionTooCoarse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ChError>;
