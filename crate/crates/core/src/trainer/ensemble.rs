use std::path::Path;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::log::{FirstHit, IterationRecord, RunLog, RunStatus, RunSummary};
use super::train::{stream_rng, train, Problem, STREAM_ENSEMBLE};
use super::TrainerError;
use crate::policy::ProbabilityEstimate;

pub const ENSEMBLE_SUMMARY_FILE: &str = "ensemble.json";
pub const ENSEMBLE_CSV_FILE: &str = "ensemble.csv";

/// One row of the aggregated curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRow {
    pub iteration: usize,
    /// Mean `P(exact)` over the members estimated at this iteration; members
    /// that already stopped contribute their final estimate.
    pub p_exact_mean: Option<f64>,
    /// `sqrt(sum se^2) / k` over the same members.
    pub p_exact_se: Option<f64>,
    /// Fraction of members converged at or before this iteration.
    pub success_rate: f64,
    /// Mean batch reward over members still running.
    pub total_reward: Option<f64>,
    /// Mean best-so-far reward.
    pub best_reward: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberSummary {
    pub seed: u64,
    pub status: RunStatus,
    pub iterations: usize,
    pub models_evaluated: usize,
    pub best_expression: Option<String>,
    pub final_probability: Option<ProbabilityEstimate>,
    pub first_hit: Option<FirstHit>,
}

impl From<&RunSummary> for MemberSummary {
    fn from(s: &RunSummary) -> Self {
        Self {
            seed: s.seed,
            status: s.status,
            iterations: s.iterations,
            models_evaluated: s.models_evaluated,
            best_expression: s.best_expression.clone(),
            final_probability: s.final_probability,
            first_hit: s.first_hit,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub master_seed: u64,
    pub members: Vec<MemberSummary>,
    pub converged: usize,
    pub curve: Vec<EnsembleRow>,
    pub config: RunConfig,
}

pub fn member_seeds(master: u64, runs: usize) -> Vec<u64> {
    (0..runs as u64)
        .map(|r| stream_rng(master, STREAM_ENSEMBLE, r).next_u64())
        .collect()
}

/// A member's iteration of convergence, if it converged.
pub fn converged_at(summary: &RunSummary) -> Option<usize> {
    (summary.status == RunStatus::Converged).then_some(summary.iterations)
}

/// Aligns member logs by iteration and averages them.
pub fn aggregate(logs: &[&[IterationRecord]], converged: &[Option<usize>]) -> Vec<EnsembleRow> {
    let mut iterations: Vec<usize> = logs.iter().flat_map(|l| l.iter().map(|r| r.iteration)).collect();
    iterations.sort_unstable();
    iterations.dedup();
    let mut cursor = vec![0usize; logs.len()];
    let mut last_p: Vec<Option<(f64, f64)>> = vec![None; logs.len()];
    let mut last_best: Vec<Option<f64>> = vec![None; logs.len()];
    let n = logs.len().max(1) as f64;
    iterations
        .into_iter()
        .map(|it| {
            let mut measured_here = false;
            let mut current: Vec<Option<&IterationRecord>> = Vec::with_capacity(logs.len());
            for (j, log) in logs.iter().enumerate() {
                let rec = log.get(cursor[j]).filter(|r| r.iteration == it);
                if let Some(r) = rec {
                    cursor[j] += 1;
                    if let (Some(p), se) = (r.p_exact, r.p_exact_se) {
                        last_p[j] = Some((p, se.unwrap_or(0.0)));
                        measured_here = true;
                    }
                    if r.best_reward.is_some() {
                        last_best[j] = r.best_reward;
                    }
                }
                current.push(rec);
            }
            let (mut p_sum, mut se2, mut k) = (0.0, 0.0, 0usize);
            if measured_here {
                for (j, log) in logs.iter().enumerate() {
                    let ended = cursor[j] >= log.len() && current[j].is_none();
                    let here = current[j].is_some_and(|r| r.p_exact.is_some());
                    if let (true, Some((p, se))) = (here || ended, last_p[j]) {
                        p_sum += p;
                        se2 += se * se;
                        k += 1;
                    }
                }
            }
            let rewards: Vec<f64> = current.iter().flatten().filter_map(|r| r.total_reward).collect();
            let bests: Vec<f64> = last_best.iter().flatten().copied().collect();
            EnsembleRow {
                iteration: it,
                p_exact_mean: (k > 0).then(|| p_sum / k as f64),
                p_exact_se: (k > 0).then(|| se2.sqrt() / k as f64),
                success_rate: converged.iter().filter(|c| c.is_some_and(|c| c <= it)).count() as f64 / n,
                total_reward: (!rewards.is_empty()).then(|| rewards.iter().sum::<f64>() / rewards.len() as f64),
                best_reward: (!bests.is_empty()).then(|| bests.iter().sum::<f64>() / bests.len() as f64),
            }
        })
        .collect()
}

pub fn write_ensemble_csv<W: std::io::Write>(w: W, rows: &[EnsembleRow]) -> Result<(), TrainerError> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["iteration", "P_exact_mean", "P_exact_se", "success_rate", "total_reward", "best_reward"])?;
    for r in rows {
        csv.serialize((r.iteration, r.p_exact_mean, r.p_exact_se, r.success_rate, r.total_reward, r.best_reward))?;
    }
    csv.flush()?;
    Ok(())
}

/// Runs `cfg.runs` independent trainings sharing one environment and cache.
pub fn run_ensemble(cfg: &RunConfig, out: Option<&Path>) -> Result<(EnsembleSummary, Vec<RunLog>), TrainerError> {
    let problem = Problem::new(cfg)?;
    ensemble(&problem, out)
}

pub fn ensemble(problem: &Problem, out: Option<&Path>) -> Result<(EnsembleSummary, Vec<RunLog>), TrainerError> {
    let cfg = &problem.config;
    let seeds = member_seeds(cfg.seed, cfg.runs);
    let mut logs = Vec::with_capacity(seeds.len());
    for (r, &seed) in seeds.iter().enumerate() {
        let dir = out.map(|d| d.join(format!("run_{r:03}")));
        logs.push(train(problem, seed, dir.as_deref(), true)?);
    }
    let summary = summarize(cfg, &logs);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(super::log::CONFIG_ECHO_FILE), cfg.to_toml_string())?;
        let f = std::io::BufWriter::new(std::fs::File::create(dir.join(ENSEMBLE_SUMMARY_FILE))?);
        serde_json::to_writer_pretty(f, &summary)?;
        write_ensemble_csv(std::fs::File::create(dir.join(ENSEMBLE_CSV_FILE))?, &summary.curve)?;
    }
    Ok((summary, logs))
}

pub fn summarize(cfg: &RunConfig, logs: &[RunLog]) -> EnsembleSummary {
    let records: Vec<&[IterationRecord]> = logs.iter().map(|l| l.records.as_slice()).collect();
    let conv: Vec<Option<usize>> = logs.iter().map(|l| converged_at(&l.summary)).collect();
    EnsembleSummary {
        master_seed: cfg.seed,
        members: logs.iter().map(|l| MemberSummary::from(&l.summary)).collect(),
        converged: conv.iter().filter(|c| c.is_some()).count(),
        curve: aggregate(&records, &conv),
        config: cfg.clone(),
    }
}
