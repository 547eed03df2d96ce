use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("covariance has no second derivative at lag {lag}")]
    NonSmooth { lag: f64 },

    #[error("tail exponent {exponent:.4} (se {se:.4}) cannot decide finiteness of moment of order {order}")]
    InconclusiveTail { order: u32, exponent: f64, se: f64 },

    #[error("degenerate lag {lag}: 1 - r^2 = {det:e}")]
    DegenerateLag { lag: f64, det: f64 },

    #[error("observed block is singular (smallest pivot {pivot:e})")]
    DegenerateObservation { pivot: f64 },

    #[error("quadrature did not converge: estimate {value:e}, error {error:e}")]
    QuadratureNonConvergent { value: f64, error: f64 },

    #[error("inner Monte Carlo reached {draws} draws with relative SE {rel_se:.4}")]
    InnerMCBudgetExceeded { draws: usize, rel_se: f64 },

    #[error("circulant embedding not PSD after padding (min eigenvalue {min_eigenvalue:e})")]
    EmbeddingNotPSD { min_eigenvalue: f64 },

    #[error("Newton polish stalled in {cells} cells")]
    NewtonStall { cells: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{failed} of {total} replicates failed: {first}")]
    ReplicateFailures { failed: usize, total: usize, first: String },

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
