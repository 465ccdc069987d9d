use std::fmt;
use std::path::PathBuf;

use pricewise_demand::DemandError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Pipeline stages in execution order.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Features,
    Demand,
    Elasticity,
    Optimize,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Ingest,
        Stage::Features,
        Stage::Demand,
        Stage::Elasticity,
        Stage::Optimize,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Features => "features",
            Stage::Demand => "demand",
            Stage::Elasticity => "elasticity",
            Stage::Optimize => "optimize",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<CliError>,
    },

    #[error(transparent)]
    Core(#[from] pricewise_core::Error),

    #[error(transparent)]
    Demand(#[from] DemandError),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed run artifact {path}: {message}")]
    Artifact { path: PathBuf, message: String },

    #[error("run directory {0} is locked by another run")]
    Locked(PathBuf),

    #[error("nothing to report: {0} has no recommendations")]
    NothingToReport(PathBuf),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn artifact(path: impl Into<PathBuf>, message: impl fmt::Display) -> Self {
        CliError::Artifact {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// The stage a failure is attributed to, if any.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            CliError::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    /// Process exit status: 2 validation, 3 infeasible, 4 I/O, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use pricewise_core::Error as Core;
        match self {
            CliError::Stage { source, .. } => source.exit_code(),
            CliError::Config(_) => 2,
            CliError::Core(Core::Validation { .. } | Core::Domain(_)) => 2,
            CliError::Core(Core::Infeasible(_)) => 3,
            CliError::Core(Core::Io { .. }) => 4,
            CliError::Core(Core::Csv { source, .. }) if source.is_io_error() => 4,
            CliError::Core(Core::Csv { .. }) => 2,
            CliError::Demand(DemandError::Io { .. }) | CliError::Io { .. } => 4,
            CliError::Artifact { .. } => 4,
            CliError::NothingToReport(_) => 2,
            _ => 1,
        }
    }
}

/// Attributes an error to a pipeline stage.
pub trait StageContext<T> {
    fn in_stage(self, stage: Stage) -> Result<T>;
}

impl<T, E: Into<CliError>> StageContext<T> for std::result::Result<T, E> {
    fn in_stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| match e.into() {
            nested @ CliError::Stage { .. } => nested,
            other => CliError::Stage {
                stage,
                source: Box::new(other),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        let infeasible: Result<()> = Err(pricewise_core::Error::Infeasible("c".into()).into());
        let staged = infeasible.in_stage(Stage::Optimize).unwrap_err();
        assert_eq!(staged.stage(), Some(Stage::Optimize));
        assert_eq!(staged.exit_code(), 3);
        let io = CliError::io("x", std::io::Error::other("gone"));
        assert_eq!(io.exit_code(), 4);
    }

    #[test]
    fn innermost_stage_wins() {
        let inner: Result<()> = Err(CliError::Config("x".into()));
        let once = inner.in_stage(Stage::Ingest);
        let twice = once.in_stage(Stage::Demand).unwrap_err();
        assert_eq!(twice.stage(), Some(Stage::Ingest));
    }
}
