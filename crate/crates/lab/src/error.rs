use std::fmt;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config: {key}: {message}")]
    Config { key: String, message: String },
    #[error("space file: {0}")]
    SpaceFormat(String),
    #[error("core: {0}")]
    Core(#[from] potlab_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("threads: {0}")]
    Threads(String),
}

pub type LabResult<T> = Result<T, LabError>;

impl LabError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        LabError::Config { key: key.into(), message: message.into() }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LabError::Config { .. } => "config",
            LabError::SpaceFormat(_) => "space-format",
            LabError::Core(_) => "core",
            LabError::Io(_) => "io",
            LabError::Csv(_) => "csv",
            LabError::Threads(_) => "threads",
        }
    }

    /// `error kind=<kind> message="<text>"` on one line.
    pub fn machine_line(&self) -> MachineLine<'_> {
        MachineLine(self)
    }
}

pub struct MachineLine<'a>(&'a LabError);

impl fmt::Display for MachineLine<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = crate::config::one_line(&self.0.to_string()).replace('\\', "\\\\").replace('"', "\\\"");
        write!(f, "error kind={} message=\"{}\"", self.0.kind(), text)
    }
}
