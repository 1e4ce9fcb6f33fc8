use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("internal inconsistency: {0}")]
    Inconsistency(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Range(_) => 3,
            CliError::Inconsistency(_) => 4,
        }
    }

    /// Prefixes the message with the command or stage it came from.
    pub fn context(self, what: &str) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{what}: {m}")),
            CliError::Range(m) => CliError::Range(format!("{what}: {m}")),
            CliError::Inconsistency(m) => CliError::Inconsistency(format!("{what}: {m}")),
        }
    }
}

impl From<cmj_core::Error> for CliError {
    fn from(e: cmj_core::Error) -> Self {
        if e.is_range() {
            CliError::Range(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
