use thiserror::Error;

/// Failures surfaced by the command line, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("verification failed: {0}")]
    Verify(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Verify(_) | CliError::Io(_) => 1,
        }
    }

    /// Classifies a library error raised while handling data.
    pub fn from_run(e: pomp::Error) -> Self {
        use pomp::Error as E;
        if e.is_numeric() {
            return CliError::Numeric(e.to_string());
        }
        match e {
            E::NonIntegerObservation(_)
            | E::NegativeObservation(_)
            | E::ObservationNotBinary(_)
            | E::NonfiniteObservation(_)
            | E::NonincreasingEventTimes { .. }
            | E::NonmonotoneTime { .. } => CliError::Data(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
