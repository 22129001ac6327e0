use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] vee_ww::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit status. Invalid inputs rejected by the library count as
    /// configuration errors.
    pub fn exit_code(&self) -> u8 {
        use vee_ww::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Model(E::Domain(_) | E::InsufficientSamples { .. } | E::StepSizeTooLarge { .. }) => 2,
            CliError::Model(E::UnphysicalRegion { .. }) => 3,
            CliError::Model(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

pub(crate) fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}
