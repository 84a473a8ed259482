use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(
        "operator unspecified: no manifest in the input directory and no operator in the config"
    )]
    OperatorUnspecified,
    #[error("malformed {what}: {detail}")]
    Malformed { what: String, detail: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Core(#[from] unroll_core::Error),
    #[error("training diverged at step {step}; last good checkpoint kept at {checkpoint}")]
    Diverged { step: u64, checkpoint: PathBuf },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn malformed(what: impl Into<String>, detail: impl ToString) -> Self {
        CliError::Malformed {
            what: what.into(),
            detail: detail.to_string(),
        }
    }

    /// 2 for unreadable input data, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        use unroll_core::Error as E;
        match self {
            CliError::Malformed { .. } => 2,
            CliError::Core(E::Malformed(_) | E::UnsupportedFormat(_) | E::InvalidImage(_)) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
