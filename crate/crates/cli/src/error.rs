use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("nothing to plot: {0}")]
    EmptySeries(String),

    #[error(transparent)]
    Core(#[from] levlab_core::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Tag printed in front of the message on stderr.
    pub fn name(&self) -> &'static str {
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::Io { .. } => "IoError",
            CliError::EmptySeries(_) => "EmptySeries",
            CliError::Core(e) => e.name(),
        }
    }

    /// 2 for anything wrong with the inputs, 3 when the numerics fail.
    pub fn exit_code(&self) -> i32 {
        use levlab_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } | CliError::EmptySeries(_) => 2,
            CliError::Core(E::InvalidInput(_) | E::SchemaMismatch { .. }) => 2,
            CliError::Core(_) => 3,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
