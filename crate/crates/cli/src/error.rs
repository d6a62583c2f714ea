use std::fmt;
use std::path::Path;

use condensate_sweep::SweepError;

/// Failure classes, one per exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or parameters: exit 1.
    Validation(String),
    /// Divergence or non-convergence: exit 2.
    Numerical(String),
    /// Filesystem or integrity failure: exit 3.
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<condensate_core::Error> for CliError {
    fn from(e: condensate_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Model(m) => m.into(),
            SweepError::InvalidSpec(_) | SweepError::SpecMismatch { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}
