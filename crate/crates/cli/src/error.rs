use std::path::PathBuf;
use std::process::ExitCode;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] termstruct::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for usage, configuration and input problems; 3 when the model fails.
    pub fn exit_code(&self) -> ExitCode {
        use termstruct::Error as E;
        match self {
            CliError::Core(E::Numeric(_) | E::NoAcceptedDraws { .. }) => ExitCode::from(3),
            _ => ExitCode::from(2),
        }
    }
}
