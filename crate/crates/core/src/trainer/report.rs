use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::ensemble::{aggregate, EnsembleRow};
use super::log::{read_runlog, read_summary, IterationRecord, RunSummary, CONFIG_ECHO_FILE, RUNLOG_FILE, SUMMARY_FILE};
use super::TrainerError;
use crate::dsl::parse_expr;
use crate::numerics::{integrate, write_snapshots_csv, BurgersRhs, ModeledRhs};

pub const CURVE_FILE: &str = "curve.csv";
pub const ENSEMBLE_CURVE_FILE: &str = "ensemble_curve.csv";
pub const SNAPSHOTS_FILE: &str = "snapshots.csv";
pub const DEFAULT_SNAPSHOT_TIMES: [f64; 5] = [0.0, 0.2, 0.4, 0.6, 0.8];

#[derive(Clone, Debug, PartialEq)]
pub struct ReportFiles {
    pub curve: PathBuf,
    pub snapshots: PathBuf,
}

/// A run log on disk: the records plus the summary written next to them, if any.
pub struct LoadedLog {
    pub records: Vec<IterationRecord>,
    pub summary: Option<RunSummary>,
}

/// Accepts a run directory or the path of its `runlog.jsonl`.
pub fn load_log(path: &Path) -> Result<LoadedLog, TrainerError> {
    let file = if path.is_dir() { path.join(RUNLOG_FILE) } else { path.to_path_buf() };
    let records = read_runlog(&file)?;
    let summary_path = file.with_file_name(SUMMARY_FILE);
    let summary = if summary_path.exists() {
        Some(read_summary(&summary_path)?)
    } else {
        None
    };
    Ok(LoadedLog { records, summary })
}

pub fn write_curve_csv<W: std::io::Write>(w: W, rows: &[EnsembleRow]) -> Result<(), TrainerError> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["iteration", "P_exact_mean", "P_exact_se", "total_reward", "best_reward"])?;
    for r in rows {
        csv.serialize((r.iteration, r.p_exact_mean, r.p_exact_se, r.total_reward, r.best_reward))?;
    }
    csv.flush()?;
    Ok(())
}

/// Curve rows for one or more logs; a single log maps onto its own values.
pub fn curve_rows(logs: &[LoadedLog]) -> Vec<EnsembleRow> {
    let records: Vec<&[IterationRecord]> = logs.iter().map(|l| l.records.as_slice()).collect();
    let conv: Vec<Option<usize>> = logs
        .iter()
        .map(|l| l.summary.as_ref().and_then(super::ensemble::converged_at))
        .collect();
    aggregate(&records, &conv)
}

/// Writes the probability/reward curve and solution snapshots of the best
/// model found (the reference solution when none is recorded).
pub fn report(paths: &[PathBuf], out: &Path) -> Result<ReportFiles, TrainerError> {
    if paths.is_empty() {
        return Err(TrainerError::Config("report needs at least one run log".into()));
    }
    let logs = paths.iter().map(|p| load_log(p)).collect::<Result<Vec<_>, _>>()?;
    std::fs::create_dir_all(out)?;
    let config = logs
        .iter()
        .find_map(|l| l.summary.as_ref().map(|s| s.config.clone()))
        .unwrap_or_default();
    std::fs::write(out.join(CONFIG_ECHO_FILE), config.to_toml_string())?;

    let curve = out.join(if logs.len() == 1 { CURVE_FILE } else { ENSEMBLE_CURVE_FILE });
    write_curve_csv(std::fs::File::create(&curve)?, &curve_rows(&logs))?;

    let best = logs
        .iter()
        .filter_map(|l| l.summary.as_ref())
        .filter_map(|s| s.best_reward.zip(s.best_expression.as_deref()))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, e)| e.to_string());
    let snapshots = out.join(SNAPSHOTS_FILE);
    write_snapshots(&config, best.as_deref(), &snapshots)?;
    Ok(ReportFiles { curve, snapshots })
}

fn write_snapshots(config: &RunConfig, model: Option<&str>, path: &Path) -> Result<(), TrainerError> {
    let solver = &config.solver;
    let grid = solver.grid.build()?;
    let times: Vec<f64> = DEFAULT_SNAPSHOT_TIMES.iter().copied().filter(|&t| t <= solver.t_end + 1e-12).collect();
    let traj = match model {
        Some(text) => {
            let expr = parse_expr(text).map_err(|e| TrainerError::Config(format!("best expression: {e}")))?;
            integrate(solver, &mut ModeledRhs::new(&grid, solver.nu, &expr), &times)?
        }
        None => integrate(solver, &mut BurgersRhs::new(&grid, solver.nu), &times)?,
    };
    write_snapshots_csv(std::fs::File::create(path)?, &grid, &traj.snapshots)?;
    Ok(())
}
