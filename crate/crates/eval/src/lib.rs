//! Evaluation harness: runs the scenario grid for every method, turns
//! annotations into metrics, and computes the statistics and reports.

pub mod annotate;
pub mod grid;
pub mod report;
pub mod stats;

use thiserror::Error;

pub use annotate::{auto_annotate, explanation_accuracy, majority, majority_vote, read_annotations, write_annotations, AnnotationRow, MetricRow, Vote};
pub use grid::{read_results, run_grid, write_results, EvalRecord, GridConfig, Method};
pub use report::{build_report, render_csv, render_markdown, StatsReport};
pub use stats::{chi2_sf, cochran_q, holm_adjust, mcnemar, CochranResult, McNemarMethod, McNemarResult, StatsError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("sample `{sample_id}` lacks annotator {annotator}")]
    MissingAnnotator { sample_id: String, annotator: u8 },
    #[error("sample ids differ between inputs: {0}")]
    IdMismatch(String),
    #[error("no records to evaluate")]
    Empty,
    #[error(transparent)]
    Scenario(#[from] hexar::ScenarioError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}
