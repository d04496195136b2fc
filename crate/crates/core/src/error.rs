use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("SNR is undefined for a signal with zero power")]
    UndefinedSnr,

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid rank: {0}")]
    InvalidRank(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("interpretation undefined: {0}")]
    UndefinedInterpretation(String),

    #[error("degenerate training problem: {0}")]
    DegenerateProblem(String),

    #[error("SMO did not converge after {iterations} pair updates (KKT gap {gap:.3e})")]
    NonConvergence { iterations: usize, gap: f64 },

    #[error("binary learner {index}: {source}")]
    Learner {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid fold configuration: {0}")]
    InvalidFold(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage and learner wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } | Error::Learner { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 2 invalid config, 3 data error, 4 non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) | Error::InvalidArgument(_) | Error::InvalidRank(_) => 2,
            Error::NonConvergence { .. } => 4,
            _ => 3,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at_stage(stage))
    }
}
