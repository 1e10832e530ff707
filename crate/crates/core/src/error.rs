use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("state-space cap exceeded: {0}")]
    CapExceeded(String),
    #[error("explosion cap exceeded: {count} particles at t = {time}")]
    Explosion { count: usize, time: f64 },
    #[error("rejection budget of {budget} tries exhausted: {hint}")]
    RejectionBudget { budget: u64, hint: String },
    #[error("unstable step size: {0}")]
    Unstable(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
