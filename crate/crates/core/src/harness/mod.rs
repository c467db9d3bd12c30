//! Experiment orchestration: configs, the round driver, metrics files and
//! the command line.

mod cli;
mod config;
mod output;
mod runner;

pub use cli::{cli_main, run_cli};
pub use config::{
    parse_list, parse_pairs, Algorithm, Budget, DataSource, ExperimentConfig, MilestoneUnit, ModelConfig,
    ProfileConfig, SamplerConfig, ScheduleConfig, UnseenPolicy,
};
pub use output::{summary_path, write_csv, write_outputs, Summary, CSV_HEADER};
pub use runner::{Experiment, RoundRecord, RunOptions, SeedRun, SeedRunner, THREADS_ENV};
