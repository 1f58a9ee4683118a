//! CLI error type carrying the process exit code.
//!
//! Exit codes: 0 ok, 1 usage, 2 io, 3 data, 4 internal.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Usage,
    Io,
    Data,
    Internal,
}

impl Kind {
    pub fn code(self) -> u8 {
        match self {
            Kind::Usage => 1,
            Kind::Io => 2,
            Kind::Data => 3,
            Kind::Internal => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub msg: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.msg)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError { kind: Kind::Usage, msg: msg.into() }
}

pub fn io_err(msg: impl fmt::Display) -> CliError {
    CliError { kind: Kind::Io, msg: msg.to_string() }
}

pub fn data_err(msg: impl fmt::Display) -> CliError {
    CliError { kind: Kind::Data, msg: msg.to_string() }
}

pub fn internal(msg: impl fmt::Display) -> CliError {
    CliError { kind: Kind::Internal, msg: msg.to_string() }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        io_err(e)
    }
}

impl From<glotforge_core::model::ModelError> for CliError {
    fn from(e: glotforge_core::model::ModelError) -> Self {
        use glotforge_core::model::ModelError;
        match e {
            ModelError::Io { .. } => io_err(e),
            _ => data_err(e),
        }
    }
}

impl From<glotforge_core::arpa::ArpaError> for CliError {
    fn from(e: glotforge_core::arpa::ArpaError) -> Self {
        use glotforge_core::arpa::ArpaError;
        match e {
            ArpaError::Io(_) => io_err(e),
            _ => data_err(e),
        }
    }
}

impl From<glotforge_core::charlm::CharLmError> for CliError {
    fn from(e: glotforge_core::charlm::CharLmError) -> Self {
        data_err(e)
    }
}

impl From<glotforge_core::divergence::DivergenceError> for CliError {
    fn from(e: glotforge_core::divergence::DivergenceError) -> Self {
        data_err(e)
    }
}

impl From<glotforge_core::family::FamilyError> for CliError {
    fn from(e: glotforge_core::family::FamilyError) -> Self {
        data_err(e)
    }
}

impl From<glotforge_core::curation::CurationError> for CliError {
    fn from(e: glotforge_core::curation::CurationError) -> Self {
        data_err(e)
    }
}

impl From<glotforge_core::vocab::VocabError> for CliError {
    fn from(e: glotforge_core::vocab::VocabError) -> Self {
        data_err(e)
    }
}

impl From<glotforge_core::embed::EmbedError> for CliError {
    fn from(e: glotforge_core::embed::EmbedError) -> Self {
        use glotforge_core::embed::EmbedError;
        match e {
            EmbedError::Io(_) => io_err(e),
            _ => data_err(e),
        }
    }
}
