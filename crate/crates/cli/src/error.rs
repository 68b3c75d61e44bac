use thiserror::Error;

/// Exit code 1 for bad input, 2 for failures that are not the caller's.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    User(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn user(msg: impl std::fmt::Display) -> Self {
        CliError::User(msg.to_string())
    }

    pub fn internal(msg: impl std::fmt::Display) -> Self {
        CliError::Internal(msg.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

macro_rules! user_errors {
    ($($t:ty),* $(,)?) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::User(e.to_string())
            }
        })*
    };
}

user_errors!(
    causeway_core::dataset::DatasetError,
    causeway_core::discovery::DiscoveryError,
    causeway_core::layout::LayoutError,
    causeway_core::comparison::ComparisonError,
    causeway_core::metrics::MetricError,
    causeway_core::graph::GraphError,
);
