use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const CONFIG: u8 = 2;
    pub const DOMAIN: u8 = 3;
    pub const NUMERICAL: u8 = 4;
    pub const VERIFY: u8 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config file {0} not found")]
    ConfigNotFound(PathBuf),

    #[error("config: {0}")]
    Config(String),

    #[error("output: {0}")]
    Output(String),

    #[error("{failed} check(s) failed: {names}")]
    Verification { failed: usize, names: String },

    #[error(transparent)]
    Core(#[from] bnls_core::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::ConfigNotFound(_) => "config-not-found",
            CliError::Config(_) => "config-invalid",
            CliError::Output(_) => "output",
            CliError::Verification { .. } => "verification-failed",
            CliError::Core(e) => e.kind(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        use bnls_core::Error as E;
        match self {
            CliError::ConfigNotFound(_) | CliError::Config(_) | CliError::Output(_) => exit::CONFIG,
            CliError::Verification { .. } => exit::VERIFY,
            CliError::Core(e) => match e {
                E::ParameterOutOfRange(_)
                | E::InvalidArgument(_)
                | E::MassAboveThreshold { .. }
                | E::DegenerateBundle(_) => exit::DOMAIN,
                E::FieldFormat(_) | E::Io(_) => exit::CONFIG,
                E::NotConverged { .. }
                | E::SafeguardSaturated { .. }
                | E::TruncationSensitive { .. }
                | E::MassDrift { .. }
                | E::GridMismatch
                | E::LengthMismatch { .. } => exit::NUMERICAL,
            },
        }
    }
}
