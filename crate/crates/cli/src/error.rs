use thiserror::Error;

/// Failures of a pipeline run, each mapped to a process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("certificate failure: {0}")]
    Certificate(String),

    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Certificate(_) | CliError::Io(_) => 1,
        }
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

/// Parameter and schema errors from the library are configuration errors; everything else
/// happened while certifying.
impl From<dense_orbits::Error> for CliError {
    fn from(e: dense_orbits::Error) -> Self {
        use dense_orbits::Error as E;
        match e {
            E::InvalidRadix { .. }
            | E::EmptyRadix
            | E::Depth { .. }
            | E::Dimension { .. }
            | E::Parse(_)
            | E::Parameter(_)
            | E::TowerParameter(_)
            | E::Overlap(_)
            | E::NotDisjoint(..) => CliError::Config(e.to_string()),
            other => CliError::Certificate(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
