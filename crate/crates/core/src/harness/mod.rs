//! Simulation study driver: configuration, instance generation, the
//! with/without-EM runs and their result tables.

pub mod config;
pub mod experiment;
pub mod oracle;
pub mod output;

pub use config::{ChannelKind, ExperimentConfig, OutputFormat};
pub use experiment::{make_instance, phase_corrected_nmse, run_cell, run_experiment, Instance, RunRecord, RunRow};
pub use oracle::{run_oracle_suite, OracleCheck};
pub use output::{emit_results, metadata_path, write_csv, CSV_COLUMNS};
