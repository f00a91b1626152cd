//! CLI error type with the exit-code mapping: 1 for validation and parse
//! failures, 2 for numerical failures, 3 for internal-consistency
//! failures (a guaranteed property did not hold).

use bivirus_core::ErrorCategory;

#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Io(std::io::Error),
    Core(bivirus_core::Error),
    /// Property suite reported a contradicted guarantee.
    SuiteFailure(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse(msg) => write!(f, "config error: {msg}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::SuiteFailure(msg) => write!(f, "verification failure: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<bivirus_core::Error> for CliError {
    fn from(e: bivirus_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Io(_) => 1,
            CliError::Core(e) => match e.category() {
                ErrorCategory::Validation => 1,
                ErrorCategory::Numerical => 2,
                ErrorCategory::Consistency => 3,
            },
            CliError::SuiteFailure(_) => 3,
        }
    }
}
