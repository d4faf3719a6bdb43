use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested centile falls outside the support of the distribution
    /// (1 + nu * sigma * z <= 0).
    #[error("centile {prob} lies outside the support (mu={mu}, sigma={sigma}, nu={nu})")]
    OutOfSupport { prob: f64, mu: f64, sigma: f64, nu: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("unattainable target: {0}")]
    Unattainable(String),

    /// Schema or value problems in user-supplied input.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the command-line tool: 2 for input/schema
    /// problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => 2,
            _ => 3,
        }
    }
}
