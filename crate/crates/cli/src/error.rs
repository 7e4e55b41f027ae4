use std::fmt;
use std::path::Path;

/// A failed command, carrying the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// A self-check or assertion did not hold.
    Check(String),
    /// Bad arguments, configuration or input data.
    Usage(String),
    /// Output could not be written.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Check(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    /// An unreadable input is a usage error, not an I/O failure.
    pub fn read(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Usage(format!("cannot read {}: {err}", path.display()))
    }

    pub fn write(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Io(format!("cannot write {}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Check(m) | CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<teamdm::Error> for CliError {
    fn from(e: teamdm::Error) -> Self {
        match e {
            teamdm::Error::Io(e) => CliError::Io(e.to_string()),
            teamdm::Error::Numeric(m) => CliError::Check(format!("numerical failure: {m}")),
            other => CliError::Usage(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
