//! Dataset and draw CSV files, experiment configuration and the end-to-end
//! simulation study runner.

mod config;
mod csv_io;
mod experiment;

pub use config::{ExperimentConfig, OUTPUT_DIR_ENV};
pub use csv_io::{
    load_dataset_csv, load_draws_csv, load_draws_csv_expecting, save_dataset_csv, save_draws_csv,
};
pub use experiment::{
    evaluate_draws, model_spec, run_experiment, simulate_for, version_string, ExperimentOutcome,
    ReportRow, INCOMPLETE_MARKER, REPLICATION_STRIDE, REPORT_HEADER,
};
