//! The discovery loop, the random-search baseline, seed ensembles and the
//! files they leave behind.

mod config;
mod ensemble;
mod log;
mod report;
mod train;

pub use config::{ConvergenceConfig, EquivalenceConfig, RandomSearchConfig, RunConfig, DEFAULT_TARGET};
pub use ensemble::{
    aggregate, converged_at, ensemble, member_seeds, run_ensemble, summarize, write_ensemble_csv, EnsembleRow,
    EnsembleSummary, MemberSummary, ENSEMBLE_CSV_FILE, ENSEMBLE_SUMMARY_FILE,
};
pub use log::{
    read_runlog, read_summary, FirstHit, IterationRecord, RunKind, RunLog, RunStatus, RunSummary, RunWriter,
    CHECKPOINT_FILE, CONFIG_ECHO_FILE, EVALUATIONS_FILE, RUNLOG_FILE, SUMMARY_FILE, TIMING_FILE,
};
pub use report::{
    curve_rows, load_log, report, write_curve_csv, LoadedLog, ReportFiles, CURVE_FILE, DEFAULT_SNAPSHOT_TIMES,
    ENSEMBLE_CURVE_FILE, SNAPSHOTS_FILE,
};
pub use train::{random_search, run_random_search, run_training, stream_rng, train, Problem};

use std::path::PathBuf;

use thiserror::Error;

use crate::dsl::DslError;
use crate::environment::EnvError;
use crate::numerics::NumericsError;
use crate::policy::PolicyError;

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("configuration file: {0}")]
    ConfigParse(String),
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Environment(#[from] EnvError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("run log {0} not found")]
    MissingLog(PathBuf),
    #[error("{path}: line {line}: {message}")]
    CorruptLog { path: PathBuf, line: usize, message: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
