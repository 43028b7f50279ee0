use ebk_core::EbkError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] EbkError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_HYPOTHESIS: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) if e.is_hypothesis_violation() => EXIT_HYPOTHESIS,
            CliError::Core(e) if e.is_verification_failure() => EXIT_VERIFICATION,
            _ => EXIT_INTERNAL,
        }
    }
}
