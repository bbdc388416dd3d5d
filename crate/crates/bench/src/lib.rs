//! Benchmark harness: runs a manifest of cases through prompt selection,
//! propagation and scoring, then renders comparison tables against published baselines.

use std::path::PathBuf;

use thiserror::Error;

pub mod baselines;
pub mod config;
pub mod manifest;
pub mod phantoms;
pub mod report;
pub mod runner;
pub mod tables;

pub use baselines::BaselineData;
pub use config::{Backend, ExperimentConfig, PromptMode};
pub use manifest::{load_manifest, CaseManifestEntry};
pub use report::{emit_report, render_report, CaseReport, CaseStatus, Report, ReportFormat};
pub use runner::{evaluate_volumes, run_experiment};
pub use tables::{comparison_rows, format_delta, growth_report, percent_delta};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid baselines: {0}")]
    Baselines(String),
    #[error("all {} cases failed", .0.cases.len())]
    AllFailed(Box<Report>),
    #[error("{0}")]
    Report(String),
}
