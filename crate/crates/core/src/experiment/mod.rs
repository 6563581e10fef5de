//! Experiment runner, metrics, report emission and the theory-suite driver.

mod config;
mod metrics;
mod report;
mod run;
mod suite;

pub use config::{config_hash, DataConfig, RunConfig, RUN_KEYS};
pub use metrics::{classification_metrics, metrics, regression_metrics, MetricMap, Task};
pub use report::{emit_report, render, to_csv, to_json, to_markdown, ReportFormat};
pub use run::{
    columns, prepare_data, run_experiment, run_prepared, Column, ExperimentReport, ExperimentRow,
    Failure, Prepared, SeedRun, Summary,
};
pub use suite::*;
