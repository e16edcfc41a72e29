use std::path::{Path, PathBuf};

use thiserror::Error;

/// Where in an input file a problem was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub file: PathBuf,
    pub line: Option<u64>,
    pub column: Option<usize>,
}

impl Location {
    pub fn file(file: &Path) -> Self {
        Self {
            file: file.to_path_buf(),
            line: None,
            column: None,
        }
    }

    pub fn at(file: &Path, line: u64, column: Option<usize>) -> Self {
        Self {
            file: file.to_path_buf(),
            line: Some(line),
            column,
        }
    }
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.file.display())?;
        if let Some(l) = self.line {
            write!(f, ":{l}")?;
        }
        if let Some(c) = self.column {
            write!(f, ":{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{0}: file not found")]
    Missing(Location),
    #[error("{loc}: {msg}")]
    Malformed { loc: Location, msg: String },
    #[error("{loc}: event at ({x}, {y}) is outside the {width}x{height} sensor")]
    OutOfBounds {
        loc: Location,
        x: u64,
        y: u64,
        width: u16,
        height: u16,
    },
    #[error("{loc}: timestamp {t} is earlier than the previous row")]
    NonMonotonic { loc: Location, t: String },
    #[error("{loc}: {source}")]
    Invalid {
        loc: Location,
        source: evlander_core::Error,
    },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("submission does not cover {id} at t = {times:?} s")]
    CoverageGap { id: String, times: Vec<f64> },
}

impl DataError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            DataError::Missing(Location::file(path))
        } else {
            DataError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }

    pub fn malformed(loc: Location, msg: impl Into<String>) -> Self {
        DataError::Malformed { loc, msg: msg.into() }
    }

    /// True for failures of the input rather than of the machine.
    pub fn is_validation(&self) -> bool {
        !matches!(self, DataError::Io { .. })
    }
}

/// Command failure, split by the exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input, configuration or usage (exit code 2).
    #[error("{0}")]
    Validation(String),
    /// Numerical or I/O failure while running (exit code 1).
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Internal(e.to_string())
        }
    }
}

impl From<evlander_core::Error> for CliError {
    fn from(e: evlander_core::Error) -> Self {
        use evlander_core::Error as E;
        match e {
            E::InvalidConfig(_)
            | E::InvalidPolicy(_)
            | E::InvalidProfile(_)
            | E::InvalidSequence(_)
            | E::EventOutOfBounds { .. }
            | E::UnsortedEvents { .. }
            | E::MissingInput(_)
            | E::InsufficientData { .. }
            | E::LengthMismatch { .. }
            | E::PlaneNotVisible(_) => CliError::Validation(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
