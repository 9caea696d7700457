//! Experiment configuration, seeded replications, aggregation and CSV/SVG output.

mod config;
mod output;
mod presets;
mod run;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{ExperimentConfig, PolicyEntry, DEFAULT_REPS, DEFAULT_SIGMA};
pub use output::{
    read_aggregate_csv, read_raw_csv, render_svg, write_aggregate_csv, write_csv, write_outputs,
    write_raw_csv, AGGREGATE_FILE, AGGREGATE_HEADER, RAW_FILE, RAW_HEADER, SIDECAR_FILE, SVG_FILE,
};
pub use presets::{
    all_presets, preset_config, PresetDist, PresetShape, PRESET_HORIZON, PRESET_REPS,
};
pub use run::{
    mean_std, replication_seed, replication_theta_star, run_experiment, tabulate, AggregateRow,
    ExperimentResults, RawRow, ResultsTable, Run,
};

use crate::error::BanditError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed CSV: {message}")]
    Csv { path: PathBuf, message: String },

    #[error(transparent)]
    Run(#[from] BanditError),
}

impl HarnessError {
    /// Process exit code: 1 for configuration problems, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } => 1,
            _ => 2,
        }
    }
}
