//! Actor-critic updates treating the concatenated slot probabilities as the action.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::actor::{PolicyParameters, SampledAction};
use super::mlp::{Activation, Mlp, Tape};
use super::{PolicyConfig, PolicyError, TrainingState, UpdateOutcome};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpgConfig {
    pub critic_learning_rate: f64,
    pub critic_width: usize,
    pub critic_layers: usize,
    pub replay_capacity: usize,
    pub critic_batch: usize,
    pub critic_steps: usize,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            critic_learning_rate: 1e-3,
            critic_width: 100,
            critic_layers: 5,
            replay_capacity: 10_000,
            critic_batch: 128,
            critic_steps: 1,
        }
    }
}

/// Value network `Q(p, e)` over the probability vector `p` and the one-hot
/// encoding `e` of a sampled action.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticParameters {
    net: Mlp,
    action_dim: usize,
}

pub fn init_critic(seed: u64, action_dim: usize, cfg: &DdpgConfig) -> CriticParameters {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut widths = vec![2 * action_dim];
    let mut acts = Vec::new();
    for _ in 0..cfg.critic_layers {
        widths.push(cfg.critic_width);
        acts.push(Activation::Relu);
    }
    widths.push(1);
    acts.push(Activation::Linear);
    CriticParameters {
        net: Mlp::from_widths(&widths, &acts, &mut rng),
        action_dim,
    }
}

impl CriticParameters {
    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn value(&self, probs: &[f64], encoding: &[f64]) -> f64 {
        let input = [probs, encoding].concat();
        self.net.forward(&input)[0]
    }
}

pub fn one_hot(counts: &[usize], actions: &[usize]) -> Vec<f64> {
    let mut e = vec![0.0; counts.iter().sum()];
    let mut o = 0;
    for (&c, &a) in counts.iter().zip(actions) {
        e[o + a] = 1.0;
        o += c;
    }
    e
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayEntry {
    /// Policy output at sampling time, shared by the whole batch.
    pub probs: Arc<Vec<f64>>,
    pub actions: Vec<usize>,
    pub reward: f64,
}

/// Bounded FIFO of past (probabilities, action, reward) triples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<ReplayEntry>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            entries: VecDeque::new(),
        }
    }

    pub fn push(&mut self, entry: ReplayEntry) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> impl Iterator<Item = &ReplayEntry> {
        self.entries.iter()
    }

    pub fn get(&self, i: usize) -> &ReplayEntry {
        &self.entries[i]
    }
}

/// Mean squared error of the critic on `entries` and its parameter gradient.
pub fn critic_loss(
    critic: &CriticParameters,
    counts: &[usize],
    entries: &[&ReplayEntry],
) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; critic.net.param_count()];
    let mut tape = Tape::default();
    let mut input = Vec::with_capacity(2 * critic.action_dim);
    let inv = 1.0 / entries.len() as f64;
    let mut loss = 0.0;
    for e in entries {
        input.clear();
        input.extend_from_slice(&e.probs);
        input.extend(one_hot(counts, &e.actions));
        critic.net.forward_tape(&input, &mut tape);
        let diff = tape.output()[0] - e.reward;
        loss += inv * diff * diff;
        critic.net.backward(&tape, &[2.0 * inv * diff], &mut grad);
    }
    (loss, grad)
}

/// `Q(p, p) + beta H` at the current policy output and its actor gradient.
///
/// Feeding the probabilities into the encoding half of the critic makes the
/// critic's interpolation between one-hot actions the quantity ascended.
pub fn ddpg_actor_objective(
    actor: &PolicyParameters,
    critic: &CriticParameters,
    entropy_weight: f64,
) -> Result<(f64, Vec<f64>), PolicyError> {
    let mut tape = Tape::default();
    let dist = actor.forward_tape(&mut tape)?;
    let p = dist.flat();
    let input = [p, p].concat();
    let mut ctape = Tape::default();
    critic.net.forward_tape(&input, &mut ctape);
    let mut value = ctape.output()[0];
    let mut scratch = vec![0.0; critic.net.param_count()];
    let gin = critic.net.backward(&ctape, &[1.0], &mut scratch);
    let d = p.len();
    let gp: Vec<f64> = (0..d).map(|k| gin[k] + gin[d + k]).collect();
    let mut gz = dist.softmax_backward(&gp);
    if entropy_weight != 0.0 {
        value += entropy_weight * dist.entropy();
        for (g, h) in gz.iter_mut().zip(dist.entropy_grad_logits()) {
            *g += entropy_weight * h;
        }
    }
    Ok((value, actor.backprop_logits(&tape, &gz)))
}

/// Stores the batch, fits the critic on replayed samples, then moves the actor
/// along the critic's gradient.
#[allow(clippy::too_many_arguments)]
pub fn update_ddpg<R: Rng + ?Sized>(
    actor: &mut PolicyParameters,
    critic: &mut CriticParameters,
    state: &mut TrainingState,
    config: &PolicyConfig,
    replay: &mut ReplayBuffer,
    batch: &[(SampledAction, f64)],
    rng: &mut R,
) -> Result<UpdateOutcome, PolicyError> {
    if batch.is_empty() {
        return Err(PolicyError::EmptyBatch);
    }
    let probs = Arc::new(actor.forward()?.flat().to_vec());
    for (a, r) in batch {
        replay.push(ReplayEntry {
            probs: Arc::clone(&probs),
            actions: a.actions.clone(),
            reward: *r,
        });
    }
    let counts = actor.choice_counts().to_vec();
    let critic_opt = state
        .critic_optimizer
        .get_or_insert_with(|| super::Adam::new(critic.net.param_count(), config.ddpg.critic_learning_rate));
    let mut applied = true;
    for _ in 0..config.ddpg.critic_steps {
        let k = config.ddpg.critic_batch.min(replay.len()).max(1);
        let picks: Vec<&ReplayEntry> = (0..k).map(|_| replay.get(rng.random_range(0..replay.len()))).collect();
        let (_, g) = critic_loss(critic, &counts, &picks);
        if g.iter().all(|v| v.is_finite()) {
            critic_opt.descend(critic.net.params_mut(), &g);
        } else {
            applied = false;
        }
    }
    let (_, grad) = ddpg_actor_objective(actor, critic, state.entropy_weight)?;
    let finite = grad.iter().all(|g| g.is_finite());
    if finite {
        state.actor_optimizer.ascend(actor.net_mut().params_mut(), &grad);
    }
    applied &= finite;
    if !applied {
        state.skipped_steps += 1;
    }
    state.entropy_weight *= config.entropy_decay;
    state.iteration += 1;
    Ok(UpdateOutcome {
        applied,
        grad_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
    })
}
