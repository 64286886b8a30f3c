use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scalar solve did not converge after {iterations} iterations (target {target:e})")]
    ScalarSolve { iterations: usize, target: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mesh parse error at line {line}: {message}")]
    MeshParse { line: usize, message: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("boundary marker {0} has no boundary condition")]
    MissingBoundaryCondition(String),

    #[error("incompatible Dirichlet data: net boundary flux {flux:e} on a closed domain")]
    IncompatibleFlux { flux: f64 },

    #[error("non-finite value in constitutive evaluation on cell {cell}")]
    NonFinite { cell: usize },

    #[error("state size mismatch: {0}")]
    SizeMismatch(String),

    #[error("singular or failed factorization: {0}")]
    Factorization(String),

    #[error("augmented Lagrangian Schur approximation needs gamma > 0")]
    DegenerateSchur,

    #[error("Krylov solver breakdown: {0}")]
    KrylovBreakdown(String),

    #[error("Newton did not converge in {iterations} iterations (residual {residual:e})")]
    NewtonMaxIterations { iterations: usize, residual: f64 },

    #[error("line search failed at Newton iteration {iteration} (step {step:e})")]
    LineSearch { iteration: usize, step: f64 },

    #[error("linear solver failed at Newton iteration {iteration}: {source}")]
    LinearSolve {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("continuation stage {stage} failed: {source}")]
    Continuation {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("point outside the domain: {0}")]
    OutsideDomain(String),

    #[error("unknown verification suite `{0}`")]
    UnknownSuite(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
