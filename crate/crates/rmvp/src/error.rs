use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("MSH parse error at line {line}: {msg}")]
    MshParse { line: usize, msg: String },

    #[error("mesh validation failed: {0}")]
    MeshValidation(String),

    #[error("region '{0}' contains no elements")]
    EmptyRegion(String),

    #[error("interface extraction failed: {0}")]
    Interface(String),

    #[error("point ({0}, {1}) is outside the meshed domain")]
    PointOutsideDomain(f64, f64),

    #[error("singular evaluation: target ({x}, {y}) coincides with a line current")]
    SingularEvaluation { x: f64, y: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("material model error: {0}")]
    Material(String),

    #[error("linear solver failed: {0}")]
    SolverFailure(String),

    #[error("Newton iteration did not converge: residual {residual:.3e} after {iterations} iterations")]
    NewtonDiverged { iterations: usize, residual: f64 },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line interface.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::SolverFailure(_) | Error::NewtonDiverged { .. } => 2,
            _ => 1,
        }
    }
}
