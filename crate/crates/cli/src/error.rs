use ksfluid::KsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    /// A gate or a check failed; the reports are already on disk.
    #[error("{0}")]
    Refused(String),

    #[error("cannot write output: {0}")]
    Output(String),

    #[error(transparent)]
    Library(#[from] KsError),
}

impl CliError {
    /// 2 for anything wrong with the configuration, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Library(KsError::InvalidInput(_) | KsError::Json(_)) => 2,
            _ => 1,
        }
    }
}

/// Errors while turning a config into library objects count as configuration
/// errors unless they come from the numerics.
pub fn at_load(e: KsError) -> CliError {
    match e {
        KsError::InvalidInput(m) => CliError::Config(m),
        KsError::Json(e) => CliError::Config(e.to_string()),
        KsError::Io(e) => CliError::Config(e.to_string()),
        other => CliError::Library(other),
    }
}
