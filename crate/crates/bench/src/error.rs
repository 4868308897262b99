use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unparsable CSV rows {rows:?}: {reason}")]
    Rows { rows: Vec<usize>, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] dpstore::Error),
    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: dpstore::Error,
    },
    #[error("trial {trial}: {message}")]
    Mismatch { trial: usize, message: String },
}

impl BenchError {
    /// Short class name printed by the CLI.
    pub fn class(&self) -> &'static str {
        match self {
            BenchError::Config { .. } | BenchError::Invalid(_) => "config",
            BenchError::Rows { .. } | BenchError::Csv(_) => "data",
            BenchError::Io(_) | BenchError::Json(_) => "io",
            BenchError::Core(_) | BenchError::Trial { .. } => "system",
            BenchError::Mismatch { .. } => "mismatch",
        }
    }

    /// Process exit code for the class.
    pub fn exit_code(&self) -> i32 {
        match self.class() {
            "config" => 2,
            "data" => 3,
            "io" => 4,
            "system" => 5,
            _ => 6,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
