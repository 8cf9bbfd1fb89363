//! Command-line harness around `hybridsci-core`: JSON-configured end-to-end
//! runs (simulate → reconstruct → fuse → score), frame-gap sweeps and
//! report generation.

pub mod cli;
pub mod config;
pub mod error;
pub mod measurement;
pub mod pipeline;
pub mod scene;
pub mod sweep;

pub use config::PipelineConfig;
pub use error::{CliError, CliResult, ExitKind, Stage};
pub use pipeline::{run_pipeline, run_pipeline_on, PipelineReport, RunOptions};
pub use sweep::{sweep_frame_gap, sweep_frame_gap_on, SweepResult, SweepRow};
