//! The stochastic model generator: an MLP producing one categorical
//! distribution per template slot, with score-function and actor-critic updates.

mod actor;
mod adam;
mod checkpoint;
mod ddpg;
mod mlp;
mod probability;
mod reinforce;

pub use actor::{
    init_policy, init_policy_for_counts, sample_from, sample_models, ActorConfig, PolicyParameters,
    SampledAction, SlotDistributions, ACTOR_INPUT,
};
pub use adam::Adam;
pub use checkpoint::{BlockInfo, Checkpoint, CheckpointHeader, CHECKPOINT_FORMAT};
pub use ddpg::{
    critic_loss, ddpg_actor_objective, init_critic, one_hot, update_ddpg, CriticParameters, DdpgConfig,
    ReplayBuffer, ReplayEntry,
};
pub use mlp::{Activation, LayerShape, Mlp, Tape};
pub use probability::{canonical_probability, exact_probability, ProbabilityEstimate, DEFAULT_PROBABILITY_SAMPLES};
pub use reinforce::{reinforce_objective, update_reinforce};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::DslError;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("update called with an empty batch")]
    EmptyBatch,
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    #[default]
    Reinforce,
    Ddpg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub mode: PolicyMode,
    pub actor: ActorConfig,
    pub learning_rate: f64,
    pub entropy_weight: f64,
    pub entropy_decay: f64,
    pub baseline_decay: f64,
    pub ddpg: DdpgConfig,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            mode: PolicyMode::Reinforce,
            actor: ActorConfig::default(),
            learning_rate: 1e-3,
            entropy_weight: 1e-2,
            entropy_decay: 0.999,
            baseline_decay: 0.9,
            ddpg: DdpgConfig::default(),
        }
    }
}

/// Optimizer and schedule state carried between updates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingState {
    pub seed: u64,
    /// Updates performed so far.
    pub iteration: u64,
    pub baseline: Option<f64>,
    pub entropy_weight: f64,
    pub actor_optimizer: Adam,
    pub critic_optimizer: Option<Adam>,
    pub skipped_steps: u64,
}

impl TrainingState {
    pub fn new(seed: u64, config: &PolicyConfig, actor: &PolicyParameters) -> Self {
        Self {
            seed,
            iteration: 0,
            baseline: None,
            entropy_weight: config.entropy_weight,
            actor_optimizer: Adam::new(actor.net().param_count(), config.learning_rate),
            critic_optimizer: None,
            skipped_steps: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateOutcome {
    /// False when a non-finite gradient caused the step to be skipped.
    pub applied: bool,
    pub grad_norm: f64,
}
