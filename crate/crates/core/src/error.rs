use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("size guard exceeded: {0}")]
    TooLarge(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("empty sector: {0}")]
    EmptySector(String),
    #[error("eigensolver did not converge after {iterations} iterations (best residuals {residuals:?})")]
    Convergence { iterations: usize, residuals: Vec<f64> },
    #[error("Hessian is singular or ill-conditioned (condition estimate {cond:.3e}); use pointwise sweep mode")]
    Stiff { cond: f64 },
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;
