//! End-to-end experiments on synthetic linear regression.

pub mod config;
pub mod data;
pub mod output;
pub mod report;
pub mod runner;
pub mod sweep;

pub use config::{ExperimentConfig, WStarSpec};
pub use data::generate_data;
pub use output::{read_trace, write_json_file, write_trace, write_trace_file, TRACE_HEADER};
pub use report::{fim_report, gradient_fd_error, validate_config, FimReport, ValidationReport};
pub use runner::{average_traces, random_valid_gamma, run_experiment, run_with_data, Mechanism, RoundRecord, RoundTrace, RunOutput, RunSummary};
pub use sweep::{default_grid, run_sweep, sweep_seeds, EntryResult, Figure, GridEntry, SweepResult};
