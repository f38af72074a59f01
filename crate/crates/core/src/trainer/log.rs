use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::TrainerError;
use crate::environment::{EvaluationRecord, NormWeighting};
use crate::policy::ProbabilityEstimate;

pub const RUNLOG_FILE: &str = "runlog.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMING_FILE: &str = "timing.jsonl";
pub const EVALUATIONS_FILE: &str = "evaluations.jsonl";
pub const CONFIG_ECHO_FILE: &str = "run_config.toml";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

/// One line of the run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Models sampled so far, this iteration included.
    pub models_evaluated: usize,
    /// `sum_i R_i` over this iteration's batch.
    pub total_reward: Option<f64>,
    /// Best reward seen so far in the run.
    pub best_reward: Option<f64>,
    pub best_expression: Option<String>,
    pub p_exact: Option<f64>,
    pub p_exact_se: Option<f64>,
    pub p_lower_bound: Option<f64>,
    /// Solver integrations this iteration (cache misses).
    pub solver_runs: usize,
}

impl IterationRecord {
    pub fn with_probability(mut self, p: Option<&ProbabilityEstimate>) -> Self {
        if let Some(p) = p {
            self.p_exact = Some(p.estimate);
            self.p_exact_se = Some(p.std_error);
            self.p_lower_bound = Some(p.lower_bound);
        }
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Training,
    RandomSearch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    NotConverged,
    Hit,
    NoHitWithinBudget,
    /// Random search without a target to look for.
    Completed,
}

impl RunStatus {
    pub fn describe(self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::NotConverged => "not converged",
            RunStatus::Hit => "hit",
            RunStatus::NoHitWithinBudget => "no hit within budget",
            RunStatus::Completed => "completed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirstHit {
    pub iteration: usize,
    /// 1-based position among all sampled models.
    pub model: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub kind: RunKind,
    pub status: RunStatus,
    pub seed: u64,
    pub iterations: usize,
    pub models_evaluated: usize,
    pub best_reward: Option<f64>,
    pub best_expression: Option<String>,
    pub final_probability: Option<ProbabilityEstimate>,
    pub first_hit: Option<FirstHit>,
    pub skipped_steps: u64,
    pub norm: NormWeighting,
    pub config: RunConfig,
}

/// Everything a run produced. Wall-clock times are kept apart from the
/// records so that the records themselves are reproducible.
#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub records: Vec<IterationRecord>,
    pub summary: RunSummary,
    pub wall_times: Vec<f64>,
}

#[derive(Serialize)]
struct TimingLine {
    iteration: usize,
    wall_time: f64,
}

/// Incremental writer for a run directory.
pub struct RunWriter {
    dir: PathBuf,
    runlog: BufWriter<File>,
    timing: BufWriter<File>,
    evaluations: Option<BufWriter<File>>,
}

impl RunWriter {
    /// Creates the directory and truncates its logs; with `resumed` the
    /// evaluation log is appended to instead.
    pub fn create(dir: &Path, config: &RunConfig, resumed: bool) -> Result<Self, TrainerError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(CONFIG_ECHO_FILE), config.to_toml_string())?;
        let open = |name: &str, append: bool| -> Result<BufWriter<File>, TrainerError> {
            let mut o = OpenOptions::new();
            o.create(true);
            if append {
                o.append(true);
            } else {
                o.write(true).truncate(true);
            }
            Ok(BufWriter::new(o.open(dir.join(name))?))
        };
        Ok(Self {
            runlog: open(RUNLOG_FILE, false)?,
            timing: open(TIMING_FILE, false)?,
            evaluations: if config.log_evaluations {
                Some(open(EVALUATIONS_FILE, resumed)?)
            } else {
                None
            },
            dir: dir.to_path_buf(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn record(&mut self, rec: &IterationRecord, wall_time: f64) -> Result<(), TrainerError> {
        serde_json::to_writer(&mut self.runlog, rec)?;
        self.runlog.write_all(b"\n")?;
        self.runlog.flush()?;
        serde_json::to_writer(
            &mut self.timing,
            &TimingLine {
                iteration: rec.iteration,
                wall_time,
            },
        )?;
        self.timing.write_all(b"\n")?;
        self.timing.flush()?;
        Ok(())
    }

    pub fn evaluations(&mut self, records: &[EvaluationRecord]) -> Result<(), TrainerError> {
        if let Some(w) = &mut self.evaluations {
            for r in records {
                serde_json::to_writer(&mut *w, &r.to_line())?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        Ok(())
    }

    pub fn summary(&mut self, summary: &RunSummary) -> Result<(), TrainerError> {
        let f = BufWriter::new(File::create(self.dir.join(SUMMARY_FILE))?);
        serde_json::to_writer_pretty(f, summary)?;
        Ok(())
    }
}

/// Reads a run log, naming the first line that does not parse.
pub fn read_runlog(path: &Path) -> Result<Vec<IterationRecord>, TrainerError> {
    let file = File::open(path).map_err(|_| TrainerError::MissingLog(path.to_path_buf()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: IterationRecord = serde_json::from_str(&line).map_err(|e| TrainerError::CorruptLog {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_summary(path: &Path) -> Result<RunSummary, TrainerError> {
    let file = File::open(path).map_err(|_| TrainerError::MissingLog(path.to_path_buf()))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| TrainerError::CorruptLog {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}
