//! Experiment configuration and the nine-setting grid runner.

mod config;
mod runner;

pub use config::{derive_seed, parse_config, DatasetConfig, ExperimentConfig, GridCell, StrategySpec};
pub use runner::{
    emit_plot_data, has_schedule, partition_report, read_all_csv_bytes, run_grid, CellOutcome,
    CellResult, CellSeries, ResultsBundle, RunOptions,
};
