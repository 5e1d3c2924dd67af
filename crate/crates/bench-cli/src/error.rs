use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("numerical failure at {context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: qnetsense::Error,
    },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed table: {0}")]
    Table(String),
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 3 for numerical
    /// failures, 1 for anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numerical { .. } => 3,
            _ => 1,
        }
    }
}

/// Attaches scenario coordinates to a core error.
pub trait AtPoint<T> {
    fn at(self, context: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> AtPoint<T> for qnetsense::Result<T> {
    fn at(self, context: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|source| CliError::Numerical { context: context(), source })
    }
}
