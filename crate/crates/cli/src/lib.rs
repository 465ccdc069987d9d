//! Command-line orchestration for the pricewise engine: configuration,
//! the staged pipeline, run directories with manifests and locks, reports,
//! and the synthetic-market A/B harness.

pub mod config;
pub mod error;
pub mod layout;
pub mod lock;
pub mod manifest;
pub mod market;
pub mod pipeline;
pub mod report;
pub mod stages;

pub use config::{DemandConfig, PartitionKey, PipelineConfig, RUN_DIR_ENV};
pub use error::{CliError, Result, Stage};
pub use manifest::Manifest;
pub use pipeline::{run_pipeline, run_stage_command, PipelineOutcome, StageCommand};
pub use report::{emit_report, Report};
