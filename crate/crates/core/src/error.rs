use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("unsupported activation: {0}")]
    UnsupportedActivation(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("integration step too large: {0}")]
    StepSize(String),

    #[error("no crossing: {0}")]
    NoCrossing(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Numeric(_)
                | Error::Diverged { .. }
                | Error::StepSize(_)
                | Error::NoCrossing(_)
                | Error::DegenerateKernel(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
