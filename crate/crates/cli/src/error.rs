//! Process-level error type and its exit-code mapping.

use std::fmt;

use normtest_core::Error as CoreError;

/// Exit code for usage errors, matching what clap uses for bad arguments.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for data-contract violations (malformed files, degenerate
/// inputs).
pub const EXIT_DATA: i32 = 3;
/// Exit code for numeric failures discovered during computation.
pub const EXIT_NUMERIC: i32 = 4;

/// Everything that can stop a CLI run.
#[derive(Debug)]
pub enum CliError {
    /// Library error, classified by [`CoreError::is_data_error`].
    Core(CoreError),
    Io(std::io::Error),
    Csv(csv::Error),
    Json(serde_json::Error),
    /// Malformed file contents: unknown columns, gaps in column numbering,
    /// values that contradict each other.
    Data(String),
    /// More than 1% of simulation replicates failed, so the rate table
    /// would be misleading.
    TooManyFailures {
        failed: usize,
        reps: usize,
    },
}

impl CliError {
    /// Maps the error to the documented process exit code.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if !e.is_data_error() => EXIT_NUMERIC,
            CliError::TooManyFailures { .. } => EXIT_NUMERIC,
            _ => EXIT_DATA,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
            CliError::Csv(e) => write!(f, "csv error: {e}"),
            CliError::Json(e) => write!(f, "json error: {e}"),
            CliError::Data(msg) => write!(f, "data error: {msg}"),
            CliError::TooManyFailures { failed, reps } => {
                write!(f, "{failed} of {reps} replicates failed (budget is 1%)")
            }
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Csv(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Json(e)
    }
}
