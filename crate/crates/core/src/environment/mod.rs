//! The reinforcement-learning environment: reference Burgers solution,
//! a-posteriori evaluation of candidate closures and their reward.

mod cache;
mod reward;

pub use reward::{error_norm, reward_formula, NormOutcome, NormWeighting, RewardConfig};

use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{Expr, ProbeSet, DEFAULT_EQUIVALENCE_TOL};
use crate::numerics::{
    integrate, BurgersRhs, Field, Grid, ModeledRhs, NumericsError, SolverConfig,
};
use cache::{FingerprintMap, Keyed};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("reward configuration: {0}")]
    Config(String),
    #[error("reference solution diverged at t = {t}")]
    ReferenceDiverged { t: f64 },
    #[error("solver configuration violates the stability limits ({0})")]
    Unstable(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// The exact missing term `-(1/2) u du/dx` in its canonical spelling.
pub fn exact_closure() -> Expr {
    Expr::reciprocal(2).neg().mul(Expr::u().mul(Expr::u().ddx()))
}

/// Reference state at the final time, integrated with the full Burgers RHS.
#[derive(Clone, Debug)]
pub struct ReferenceSolution {
    pub final_field: Field,
    pub config: SolverConfig,
    pub grid: Grid,
}

pub fn compute_reference(config: &SolverConfig) -> Result<ReferenceSolution, EnvError> {
    config.validate()?;
    let stability = config.stability()?;
    if !stability.within_limits() {
        return Err(EnvError::Unstable(format!(
            "advective {:.3}, diffusive {:.3}",
            stability.advective, stability.diffusive
        )));
    }
    let grid = config.grid.build()?;
    let mut rhs = BurgersRhs::new(&grid, config.nu);
    let traj = integrate(config, &mut rhs, &[])?;
    if let crate::numerics::IntegrationStatus::Diverged { t, .. } = traj.status {
        return Err(EnvError::ReferenceDiverged { t });
    }
    Ok(ReferenceSolution {
        final_field: traj.final_field,
        config: config.clone(),
        grid,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalStatus {
    Ok,
    Diverged,
}

/// Solver-side result of one a-posteriori evaluation; shared between
/// equivalent expressions.
#[derive(Clone, Copy, Debug, PartialEq)]
struct SolverOutcome {
    error_norm: f64,
    status: EvalStatus,
    wall_time: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationRecord {
    pub expr: Expr,
    pub error_norm: f64,
    pub n: usize,
    pub reward: f64,
    pub status: EvalStatus,
    pub wall_time: f64,
    /// Solver result reused from an equivalent expression.
    pub cached: bool,
}

/// Line format of the evaluation log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationLine {
    pub expression: String,
    pub error_norm: f64,
    pub n: usize,
    pub reward: f64,
    pub status: EvalStatus,
    pub wall_time: f64,
}

impl EvaluationRecord {
    fn from_outcome(expr: Expr, outcome: SolverOutcome, cfg: &RewardConfig, cached: bool) -> Self {
        let n = expr.term_count();
        let charged = match outcome.status {
            EvalStatus::Ok => outcome.error_norm,
            EvalStatus::Diverged => cfg.e_max,
        };
        Self {
            reward: reward_formula(charged, n, cfg),
            expr,
            error_norm: charged,
            n,
            status: outcome.status,
            wall_time: outcome.wall_time,
            cached,
        }
    }

    pub fn to_line(&self) -> EvaluationLine {
        EvaluationLine {
            expression: self.expr.render(),
            error_norm: self.error_norm,
            n: self.n,
            reward: self.reward,
            status: self.status,
            wall_time: self.wall_time,
        }
    }
}

fn solve_candidate(expr: &Expr, reference: &ReferenceSolution, cfg: &RewardConfig) -> SolverOutcome {
    let start = Instant::now();
    let mut rhs = ModeledRhs::new(&reference.grid, reference.config.nu, expr);
    let outcome = match integrate(&reference.config, &mut rhs, &[]) {
        Ok(traj) if !traj.diverged() => {
            match error_norm(&reference.final_field, &traj.final_field, &reference.grid, cfg) {
                Ok(n) if !n.diverged => (n.value, EvalStatus::Ok),
                _ => (cfg.e_max, EvalStatus::Diverged),
            }
        }
        _ => (cfg.e_max, EvalStatus::Diverged),
    };
    SolverOutcome {
        error_norm: outcome.0,
        status: outcome.1,
        wall_time: start.elapsed().as_secs_f64(),
    }
}

/// Integrates the modified equation with closure `expr` and scores it.
pub fn evaluate_model(expr: &Expr, reference: &ReferenceSolution, cfg: &RewardConfig) -> EvaluationRecord {
    let outcome = solve_candidate(expr, reference, cfg);
    EvaluationRecord::from_outcome(expr.clone(), outcome, cfg, false)
}

#[derive(Clone, Debug)]
pub struct BatchResult {
    pub records: Vec<EvaluationRecord>,
    /// `sum_i R_i` over the batch.
    pub total_reward: f64,
    /// Solver integrations actually performed.
    pub solver_runs: usize,
}

/// Reference, reward settings and the evaluation cache for one run.
pub struct Environment {
    reference: ReferenceSolution,
    reward: RewardConfig,
    probes: ProbeSet,
    cache: Mutex<FingerprintMap<SolverOutcome>>,
    pool: rayon::ThreadPool,
    workers: usize,
}

impl Environment {
    pub fn new(
        solver: &SolverConfig,
        reward: RewardConfig,
        probes: ProbeSet,
        workers: usize,
    ) -> Result<Self, EnvError> {
        reward.validate()?;
        let reference = compute_reference(solver)?;
        Self::with_reference(reference, reward, probes, workers)
    }

    pub fn with_reference(
        reference: ReferenceSolution,
        reward: RewardConfig,
        probes: ProbeSet,
        workers: usize,
    ) -> Result<Self, EnvError> {
        reward.validate()?;
        let workers = workers.max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| EnvError::Pool(e.to_string()))?;
        Ok(Self {
            reference,
            reward,
            probes,
            cache: Mutex::new(FingerprintMap::new(DEFAULT_EQUIVALENCE_TOL)),
            pool,
            workers,
        })
    }

    pub fn reference(&self) -> &ReferenceSolution {
        &self.reference
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.reward
    }

    pub fn probes(&self) -> &ProbeSet {
        &self.probes
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Number of distinct solver outcomes held in the cache.
    pub fn cache_len(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    pub fn evaluate_model(&self, expr: &Expr) -> EvaluationRecord {
        evaluate_model(expr, &self.reference, &self.reward)
    }

    /// Cached record for `expr` or any fingerprint-equivalent expression.
    pub fn cache_lookup(&self, expr: &Expr) -> Option<EvaluationRecord> {
        let keyed = Keyed::new(expr, &self.probes);
        let cache = self.cache.lock().expect("cache lock");
        cache
            .get(&keyed, &expr.render())
            .map(|&o| EvaluationRecord::from_outcome(expr.clone(), o, &self.reward, true))
    }

    /// Evaluates and caches a single expression.
    pub fn evaluate_cached(&self, expr: &Expr) -> EvaluationRecord {
        self.evaluate_batch(std::slice::from_ref(expr))
            .records
            .pop()
            .expect("one record")
    }

    /// Evaluates `exprs`, running the solver once per equivalence class not
    /// already cached. Records come back in input order, and the outcome is
    /// independent of the worker count.
    pub fn evaluate_batch(&self, exprs: &[Expr]) -> BatchResult {
        let keyed: Vec<(Keyed, String)> = self.pool.install(|| {
            exprs
                .par_iter()
                .map(|e| (Keyed::new(e, &self.probes), e.render()))
                .collect()
        });

        // Resolve against the cache and against earlier members of this batch.
        enum Source {
            Cached(SolverOutcome),
            Pending(usize),
        }
        let mut pending: Vec<usize> = Vec::new();
        let mut local: FingerprintMap<usize> = FingerprintMap::new(DEFAULT_EQUIVALENCE_TOL);
        let sources: Vec<Source> = {
            let cache = self.cache.lock().expect("cache lock");
            keyed
                .iter()
                .enumerate()
                .map(|(i, (k, text))| {
                    if let Some(&o) = cache.get(k, text) {
                        Source::Cached(o)
                    } else if let Some(&slot) = local.get(k, text) {
                        Source::Pending(slot)
                    } else {
                        local.insert(k.clone(), text.clone(), pending.len());
                        pending.push(i);
                        Source::Pending(pending.len() - 1)
                    }
                })
                .collect()
        };

        let outcomes: Vec<SolverOutcome> = self.pool.install(|| {
            pending
                .par_iter()
                .map(|&i| solve_candidate(&exprs[i], &self.reference, &self.reward))
                .collect()
        });

        {
            let mut cache = self.cache.lock().expect("cache lock");
            for (slot, &i) in pending.iter().enumerate() {
                let (k, text) = &keyed[i];
                cache.insert(k.clone(), text.clone(), outcomes[slot]);
            }
        }

        let records: Vec<EvaluationRecord> = exprs
            .iter()
            .zip(&sources)
            .enumerate()
            .map(|(i, (e, src))| match *src {
                Source::Cached(o) => EvaluationRecord::from_outcome(e.clone(), o, &self.reward, true),
                Source::Pending(slot) => {
                    let first = pending[slot] == i;
                    EvaluationRecord::from_outcome(e.clone(), outcomes[slot], &self.reward, !first)
                }
            })
            .collect();
        let total_reward = records.iter().map(|r| r.reward).sum();
        BatchResult {
            records,
            total_reward,
            solver_runs: pending.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short_config() -> SolverConfig {
        SolverConfig {
            t_end: 0.05,
            ..Default::default()
        }
    }

    #[test]
    fn zero_horizon_reference_is_the_pulse() {
        let cfg = SolverConfig {
            t_end: 0.0,
            ..Default::default()
        };
        let r = compute_reference(&cfg).unwrap();
        let g = cfg.grid.build().unwrap();
        assert_eq!(r.final_field, crate::numerics::rectangular_ic(&g, &cfg.ic).unwrap());
    }

    #[test]
    fn large_viscosity_is_flagged() {
        let cfg = SolverConfig {
            nu: 10.0,
            ..short_config()
        };
        assert!(matches!(compute_reference(&cfg), Err(EnvError::Unstable(_))));
    }

    #[test]
    fn exact_closure_reproduces_reference() {
        let r = compute_reference(&short_config()).unwrap();
        let rec = evaluate_model(&exact_closure(), &r, &RewardConfig::default());
        assert_eq!(rec.error_norm, 0.0);
        assert_eq!(rec.reward, 20.0);
        assert_eq!(rec.n, 1);
        assert_eq!(rec.status, EvalStatus::Ok);
    }

    #[test]
    fn batch_dedupes_and_preserves_order() {
        let env = Environment::new(&short_config(), RewardConfig::default(), ProbeSet::default(), 1).unwrap();
        let a = Expr::u().sub(Expr::u());
        let b = Expr::x().mul(Expr::t());
        let b2 = Expr::t().mul(Expr::x());
        let batch = vec![a.clone(), b.clone(), a.clone(), b2.clone(), a.clone()];
        let res = env.evaluate_batch(&batch);
        assert_eq!(res.solver_runs, 2);
        assert_eq!(res.records.len(), 5);
        for (rec, e) in res.records.iter().zip(&batch) {
            assert_eq!(&rec.expr, e);
        }
        assert_eq!(res.records[0].error_norm, res.records[2].error_norm);
        assert_eq!(res.records[1].error_norm, res.records[3].error_norm);
        assert!(!res.records[0].cached && res.records[2].cached);
        let again = env.evaluate_batch(&[b2]);
        assert_eq!(again.solver_runs, 0);
        assert!((res.total_reward - res.records.iter().map(|r| r.reward).sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn lookup_hits_equivalent_spelling() {
        let env = Environment::new(&short_config(), RewardConfig::default(), ProbeSet::default(), 1).unwrap();
        assert!(env.cache_lookup(&exact_closure()).is_none());
        env.evaluate_cached(&exact_closure());
        assert!(env.cache_lookup(&exact_closure()).is_some());
        let respelled = Expr::u().neg().mul(Expr::u().ddx()).mul(Expr::reciprocal(2));
        let hit = env.cache_lookup(&respelled).unwrap();
        assert_eq!(hit.expr, respelled);
        assert_eq!(hit.reward, 20.0);
        assert!(env.cache_lookup(&Expr::u()).is_none());
    }

    #[test]
    fn reward_uses_own_term_count_on_cache_hits() {
        let env = Environment::new(&short_config(), RewardConfig::default(), ProbeSet::default(), 1).unwrap();
        let one = Expr::u().mul(Expr::integer(2));
        let two = Expr::u().add(Expr::u());
        let res = env.evaluate_batch(&[one, two]);
        assert_eq!(res.solver_runs, 1);
        assert_eq!(res.records[0].error_norm, res.records[1].error_norm);
        assert_eq!(res.records[0].n, 1);
        assert_eq!(res.records[1].n, 2);
        assert!(res.records[0].reward > res.records[1].reward);
    }
}
