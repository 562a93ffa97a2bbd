use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Solver(#[from] stiga_core::Error),

    /// Some runs of a multi-run experiment did not converge.
    #[error("{0}")]
    Unconverged(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit code: 2 config, 3 solver, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Solver(stiga_core::Error::Io(_)) | Self::Io(_) => 4,
            Self::Solver(stiga_core::Error::InvalidParameter(_) | stiga_core::Error::Parse(_)) => 2,
            Self::Solver(_) | Self::Unconverged(_) => 3,
        }
    }
}
