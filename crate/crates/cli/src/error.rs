use std::fmt;
use std::path::PathBuf;

use hybridsci_core::Error as CoreError;

/// Pipeline stage an error originated from, used to tag messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Scene,
    Simulate,
    Reconstruct,
    Fuse,
    Score,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Scene => "scene",
            Stage::Simulate => "simulate",
            Stage::Reconstruct => "reconstruct",
            Stage::Fuse => "fuse",
            Stage::Score => "score",
            Stage::Output => "output",
        })
    }
}

/// Process exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Config = 2,
    Data = 3,
    Numerical = 4,
}

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("cannot parse {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
}

impl Failure {
    pub fn kind(&self) -> ExitKind {
        match self {
            Failure::Core(e) => match e {
                CoreError::InvalidParam(_) | CoreError::PyramidTooDeep { .. } => ExitKind::Config,
                CoreError::Numerical(_) => ExitKind::Numerical,
                _ => ExitKind::Data,
            },
            Failure::Json { .. } | Failure::Config(_) => ExitKind::Config,
            Failure::Data(_) => ExitKind::Data,
        }
    }
}

/// A failure tagged with the stage that produced it.
#[derive(Debug, thiserror::Error)]
#[error("[{stage}] {failure}")]
pub struct CliError {
    pub stage: Stage,
    #[source]
    pub failure: Failure,
}

impl CliError {
    pub fn new(stage: Stage, failure: impl Into<Failure>) -> Self {
        Self {
            stage,
            failure: failure.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.failure.kind() as i32
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attaches a stage tag to any convertible error.
pub trait AtStage<T> {
    fn at(self, stage: Stage) -> CliResult<T>;
}

impl<T, E: Into<Failure>> AtStage<T> for std::result::Result<T, E> {
    fn at(self, stage: Stage) -> CliResult<T> {
        self.map_err(|e| CliError::new(stage, e))
    }
}
