use novelword::ErrorCategory;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Protocol(_) => 4,
        }
    }

    pub(crate) fn data(msg: impl std::fmt::Display) -> Self {
        CliError::Data(msg.to_string())
    }
}

impl From<novelword::Error> for CliError {
    fn from(e: novelword::Error) -> Self {
        match e.category() {
            ErrorCategory::Config => CliError::Config(e.to_string()),
            ErrorCategory::Data => CliError::Data(e.to_string()),
            ErrorCategory::Protocol => CliError::Protocol(e.to_string()),
        }
    }
}

impl From<novelword::embed::EmbedError> for CliError {
    fn from(e: novelword::embed::EmbedError) -> Self {
        novelword::Error::from(e).into()
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
