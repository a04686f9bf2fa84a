use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("decomposition level {level} too deep for signal of length {len}")]
    LevelTooDeep { level: usize, len: usize },

    #[error("decomposition level must be at least 1, got {0}")]
    InvalidLevel(usize),

    #[error("signal of length {len} too short (need at least {min})")]
    SignalTooShort { len: usize, min: usize },

    #[error("inconsistent coefficient lengths: {0}")]
    InconsistentCoefficients(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("no {direction} crossing of level {frac} found in marker signal")]
    NoCrossing { direction: &'static str, frac: f64 },

    #[error("inverted window: start {start} >= end {end}")]
    WindowInverted { start: usize, end: usize },

    #[error("window [{start}, {end}] exceeds signal length {len}")]
    WindowOutOfRange { start: usize, end: usize, len: usize },

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("signals have mixed grid lengths ({expected} vs {found})")]
    MixedGridLengths { expected: usize, found: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("class {class} absent from a training fold after {attempts} fold draws")]
    ClassAbsent { class: usize, attempts: usize },

    #[error("too few samples: {0}")]
    TooFewSamples(String),

    #[error("infeasible synthetic specification: {0}")]
    InfeasibleSpec(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the name of the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_internal(&self) -> bool {
        matches!(self.root(), Error::Internal(_))
    }
}

pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
