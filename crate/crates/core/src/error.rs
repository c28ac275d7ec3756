use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grids are incompatible: {0}")]
    IncompatibleGrids(String),

    #[error("non-finite value at cell ({i}, {j}, {k})")]
    NonFinite { i: usize, j: usize, k: usize },

    #[error("ghost layer is stale; call fill_ghosts before applying a stencil")]
    StaleGhosts,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate magnitude {magnitude:e} at cell ({i}, {j}, {k})")]
    DegenerateMagnitude {
        i: usize,
        j: usize,
        k: usize,
        magnitude: f64,
    },

    #[error(
        "iterative solver stalled after {iterations} iterations (relative residual {residual:e})"
    )]
    SolverBreakdown { iterations: usize, residual: f64 },

    #[error("direct factorization hit a zero pivot in row {row}")]
    SingularFactor { row: usize },

    #[error("relative residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("run with k = {step:e}, h = {spacing:e} failed: {source}")]
    Row {
        step: f64,
        spacing: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::Step { .. } => e,
            e => Error::Step {
                step,
                source: Box::new(e),
            },
        }
    }
}
