use thiserror::Error;

/// Errors raised by the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point {0} outside of the parametric domain [0, 1]")]
    Domain(f64),

    #[error("singular geometry map at ({0}, {1})")]
    SingularGeometry(f64, f64),

    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    SolverDivergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
