use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config { field: field.into(), message: message.into() }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Verification(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<qgaudin_core::Error> for CliError {
    fn from(e: qgaudin_core::Error) -> Self {
        use qgaudin_core::Error as E;
        match e {
            E::Config { field, message } => CliError::config(field, message),
            e if e.is_numerical() => CliError::Numerical(e.to_string()),
            e => CliError::config("init", e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
