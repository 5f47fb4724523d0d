use std::path::PathBuf;

use thiserror::Error;

/// Coarse error category, used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments, missing files, malformed tokens.
    User,
    /// Input data that parsed but violates a data contract.
    Validation,
    /// A numerical procedure could not produce a result.
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::User => 1,
            ErrorKind::Validation => 2,
            ErrorKind::Numerical => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::User => "user",
            ErrorKind::Validation => "validation",
            ErrorKind::Numerical => "numerical",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot parse {what} from {token:?}: {reason}")]
    Parse {
        what: &'static str,
        token: String,
        reason: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate dataset key {0}")]
    DuplicateKey(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("zone {0} contains no grid locations")]
    EmptyZone(String),

    #[error("year {year}: no present values in {zone}")]
    AllMissing { year: i32, zone: String },

    #[error("year {year}: missing value in {zone} (enable skip-missing to ignore)")]
    MissingValue { year: i32, zone: String },

    #[error("chain initialization failed after {attempts} attempts: {diagnostics}")]
    Initialization { attempts: usize, diagnostics: String },

    #[error("no valid draws: all {excluded} draws were excluded")]
    NoValidDraws { excluded: usize },

    #[error("unidentifiable variance component {component}: {reason}")]
    Unidentifiable {
        component: &'static str,
        reason: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("JSON error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse { .. }
            | Error::Io { .. }
            | Error::InvalidArgument(_)
            | Error::Json { .. } => ErrorKind::User,
            Error::Format { .. }
            | Error::DuplicateKey(_)
            | Error::Validation(_)
            | Error::EmptyZone(_)
            | Error::AllMissing { .. }
            | Error::MissingValue { .. } => ErrorKind::Validation,
            Error::Initialization { .. }
            | Error::NoValidDraws { .. }
            | Error::Unidentifiable { .. }
            | Error::Numerical(_) => ErrorKind::Numerical,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: &'static str, token: &str, reason: impl Into<String>) -> Self {
        Error::Parse {
            what,
            token: token.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
