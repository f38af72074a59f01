use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainerError;
use crate::dsl::{
    parse_expr, Expr, TemplateLimits, VocabularyConfig, DEFAULT_EQUIVALENCE_TOL, DEFAULT_PROBE_COUNT,
    DEFAULT_PROBE_SEED, DEFAULT_SAMPLE_POINTS,
};
use crate::environment::{NormWeighting, RewardConfig};
use crate::numerics::SolverConfig;
use crate::policy::{PolicyConfig, DEFAULT_PROBABILITY_SAMPLES};

/// The closure the default problem is built around.
pub const DEFAULT_TARGET: &str = "((-(1/2)) * (u * d/dx(u)))";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// Stop once `P(exact) >= threshold`.
    pub threshold: f64,
    /// Iterations between probability estimates.
    pub cadence: usize,
    pub n_samples: usize,
    /// Without a target, stop once the best reward reaches this value.
    pub reward_threshold: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            threshold: 0.99,
            cadence: 10,
            n_samples: DEFAULT_PROBABILITY_SAMPLES,
            reward_threshold: 19.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquivalenceConfig {
    pub probe_seed: u64,
    pub probe_count: usize,
    pub sample_points: usize,
    pub tolerance: f64,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        Self {
            probe_seed: DEFAULT_PROBE_SEED,
            probe_count: DEFAULT_PROBE_COUNT,
            sample_points: DEFAULT_SAMPLE_POINTS,
            tolerance: DEFAULT_EQUIVALENCE_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomSearchConfig {
    /// Run every sample through the solver. When false only the target match
    /// is checked, which is enough for first-hit statistics.
    pub evaluate_rewards: bool,
    pub stop_at_first_hit: bool,
}

impl Default for RandomSearchConfig {
    fn default() -> Self {
        Self {
            evaluate_rewards: true,
            stop_at_first_hit: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    /// Models sampled per iteration.
    pub m: usize,
    pub max_iterations: usize,
    /// Independent runs; more than one makes an ensemble.
    pub runs: usize,
    /// Expression the run tries to find, if known.
    pub target: Option<String>,
    /// Iterations between checkpoints; 0 disables them.
    pub checkpoint_every: usize,
    /// Write every evaluation to `evaluations.jsonl`.
    pub log_evaluations: bool,
    pub vocabulary: VocabularyConfig,
    pub template: TemplateLimits,
    pub solver: SolverConfig,
    pub reward: RewardConfig,
    pub policy: PolicyConfig,
    pub convergence: ConvergenceConfig,
    pub equivalence: EquivalenceConfig,
    pub random_search: RandomSearchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 1,
            m: 100,
            max_iterations: 1000,
            runs: 1,
            target: Some(DEFAULT_TARGET.to_string()),
            checkpoint_every: 50,
            log_evaluations: true,
            vocabulary: VocabularyConfig::default(),
            template: TemplateLimits::default(),
            solver: SolverConfig::default(),
            reward: RewardConfig::default(),
            policy: PolicyConfig::default(),
            convergence: ConvergenceConfig::default(),
            equivalence: EquivalenceConfig::default(),
            random_search: RandomSearchConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, TrainerError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| TrainerError::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, TrainerError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            TrainerError::ConfigParse(msg) => TrainerError::ConfigParse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    pub fn validate(&self) -> Result<(), TrainerError> {
        let bad = |msg: String| Err(TrainerError::Config(msg));
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        let p = self.convergence.threshold;
        if !(p > 0.0 && p <= 1.0) {
            return bad(format!("convergence threshold must lie in (0, 1], got {p}"));
        }
        if self.convergence.cadence == 0 {
            return bad("probability cadence must be at least 1".into());
        }
        if self.convergence.n_samples == 0 {
            return bad("probability samples must be at least 1".into());
        }
        if self.template.n_max == 0 || self.template.max_depth == 0 {
            return bad("template limits must be at least 1".into());
        }
        let e = &self.equivalence;
        if e.probe_count == 0 || e.sample_points == 0 || e.sample_points > 1000 || !(e.tolerance > 0.0) {
            return bad("equivalence probes need a positive count, 1..=1000 sample points and a positive tolerance".into());
        }
        self.target_expr()?;
        Ok(())
    }

    pub fn target_expr(&self) -> Result<Option<Expr>, TrainerError> {
        self.target
            .as_deref()
            .map(|t| parse_expr(t).map_err(|e| TrainerError::Config(format!("target: {e}"))))
            .transpose()
    }

    /// The reduced discovery problem used for desk-scale experiments.
    ///
    /// Candidates are scored on a 100-point grid with the grid-weighted norm,
    /// which tracks the 1000-point error to about three digits at a
    /// hundredth of the cost.
    pub fn benchmark() -> Self {
        let mut cfg = Self::default();
        cfg.vocabulary.integers = vec![2];
        cfg.vocabulary.reciprocals = vec![2];
        cfg.template = TemplateLimits { n_max: 2, max_depth: 3 };
        cfg.max_iterations = 500;
        cfg.convergence.threshold = 0.95;
        cfg.solver.grid.n = 100;
        cfg.solver.dt = 0.004;
        cfg.reward.norm = NormWeighting::GridWeighted;
        cfg.log_evaluations = false;
        cfg
    }
}
