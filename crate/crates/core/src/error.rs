use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("argument outside the function domain: {0}")]
    Domain(String),

    #[error("matrix is not Hermitian (largest asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semi-definite (smallest eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("matrix is singular and no ridge was supplied")]
    Singular,

    #[error("eigenvalues {a:e} and {b:e} are not distinct (relative gap {gap:e})")]
    Degenerate { a: f64, b: f64, gap: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("scenario infeasible: threshold {tau1} exceeds the interference-free incumbent rate {max_rate}")]
    Infeasible { tau1: f64, max_rate: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
