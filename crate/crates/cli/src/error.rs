use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(#[from] mwm_core::Error),

    #[error("verification breach: {0}")]
    Breach(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn config(field: &str, reason: impl std::fmt::Display) -> Self {
        CliError::Config(format!("{field}: {reason}"))
    }

    /// A core validation error raised while building objects from the config.
    pub fn core_config(section: &str, e: mwm_core::Error) -> Self {
        match e {
            mwm_core::Error::InvalidParameter { field, reason } => {
                CliError::Config(format!("{section}.{field}: {reason}"))
            }
            other => CliError::Config(format!("{section}: {other}")),
        }
    }

    /// 2 config, 3 numeric, 4 verification breach, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Breach(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}
