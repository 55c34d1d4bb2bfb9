use std::fmt;

use photostat_core::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent input, or an I/O failure.
    Input(String),
    Core(CoreError),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Core(CoreError::Domain(_) | CoreError::Unsupported(_)) => 2,
            CliError::Core(CoreError::Numeric { .. }) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
