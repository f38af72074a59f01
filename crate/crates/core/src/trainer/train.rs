use std::path::Path;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::log::{
    read_runlog, FirstHit, IterationRecord, RunKind, RunLog, RunStatus, RunSummary, RunWriter, CHECKPOINT_FILE,
    RUNLOG_FILE,
};
use super::TrainerError;
use crate::dsl::{build_vocabulary, Expr, ProbeSet, SlotTemplate, TargetMatcher};
use crate::environment::{EvaluationRecord, Environment};
use crate::policy::{
    exact_probability, init_critic, init_policy, sample_from, update_ddpg, update_reinforce, Checkpoint,
    CriticParameters, PolicyMode, PolicyParameters, ProbabilityEstimate, ReplayBuffer, ReplayEntry, SampledAction,
    SlotDistributions, TrainingState,
};

const STREAM_INIT: u64 = 1;
const STREAM_SAMPLE: u64 = 2;
const STREAM_PROBABILITY: u64 = 3;
const STREAM_REPLAY: u64 = 4;
pub(crate) const STREAM_ENSEMBLE: u64 = 5;

/// Generator for one purpose and index, derived from the master seed.
pub fn stream_rng(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 48) | index);
    rng
}

/// Everything a run needs that does not depend on its seed.
pub struct Problem {
    pub config: RunConfig,
    pub template: SlotTemplate,
    pub env: Environment,
    pub target: Option<Expr>,
    pub matcher: Option<TargetMatcher>,
}

impl Problem {
    pub fn new(config: &RunConfig) -> Result<Self, TrainerError> {
        config.validate()?;
        let vocab = build_vocabulary(&config.vocabulary)?;
        let template = SlotTemplate::new(&vocab, config.template)?;
        let eq = &config.equivalence;
        let probes = ProbeSet::new(eq.probe_seed, eq.probe_count, eq.sample_points);
        let env = Environment::new(&config.solver, config.reward.clone(), probes.clone(), config.workers)?;
        let target = config.target_expr()?;
        let matcher = target.as_ref().map(|t| TargetMatcher::new(t, probes, eq.tolerance));
        Ok(Self {
            config: config.clone(),
            template,
            env,
            target,
            matcher,
        })
    }

    fn probability(&self, dist: &SlotDistributions, seed: u64, iteration: usize) -> Option<ProbabilityEstimate> {
        let (target, matcher) = (self.target.as_ref()?, self.matcher.as_ref()?);
        let mut rng = stream_rng(seed, STREAM_PROBABILITY, iteration as u64);
        Some(exact_probability(
            dist,
            target,
            &self.template,
            matcher,
            self.config.convergence.n_samples,
            &mut rng,
        ))
    }

    fn find_hit(&self, samples: &[SampledAction], iteration: usize, before: usize) -> Option<FirstHit> {
        let matcher = self.matcher.as_ref()?;
        samples.iter().position(|s| matcher.matches(&s.expr)).map(|i| FirstHit {
            iteration,
            model: before + i + 1,
        })
    }
}

#[derive(Clone, Debug, Default)]
struct Best {
    reward: Option<f64>,
    expression: Option<String>,
}

impl Best {
    fn offer(&mut self, records: &[EvaluationRecord]) {
        for r in records {
            if self.reward.is_none_or(|b| r.reward > b) {
                self.reward = Some(r.reward);
                self.expression = Some(r.expr.render());
            }
        }
    }
}

/// Learner state that a checkpoint must restore.
struct Learner {
    actor: PolicyParameters,
    critic: Option<CriticParameters>,
    state: TrainingState,
    replay: ReplayBuffer,
}

#[derive(Serialize, Deserialize)]
struct ResumeMeta {
    iteration: usize,
    models_evaluated: usize,
    best_reward: Option<f64>,
    best_expression: Option<String>,
    first_hit: Option<FirstHit>,
    baseline: Option<f64>,
    entropy_weight: f64,
    skipped_steps: u64,
    actor_steps: u64,
    critic_steps: Option<u64>,
    config: RunConfig,
}

impl Learner {
    fn new(problem: &Problem, seed: u64) -> Self {
        let cfg = &problem.config.policy;
        let mut init = stream_rng(seed, STREAM_INIT, 0);
        let actor = init_policy(init.next_u64(), &problem.template, &cfg.actor);
        let critic_seed = init.next_u64();
        let critic = (cfg.mode == PolicyMode::Ddpg).then(|| init_critic(critic_seed, actor.action_dim(), &cfg.ddpg));
        let state = TrainingState::new(seed, cfg, &actor);
        Self {
            actor,
            critic,
            state,
            replay: ReplayBuffer::new(cfg.ddpg.replay_capacity),
        }
    }

    fn update(&mut self, problem: &Problem, batch: &[(SampledAction, f64)], seed: u64, iteration: usize) -> Result<(), TrainerError> {
        let cfg = &problem.config.policy;
        match (&mut self.critic, cfg.mode) {
            (Some(critic), PolicyMode::Ddpg) => {
                let mut rng = stream_rng(seed, STREAM_REPLAY, iteration as u64);
                update_ddpg(&mut self.actor, critic, &mut self.state, cfg, &mut self.replay, batch, &mut rng)?;
            }
            _ => {
                update_reinforce(&mut self.actor, &mut self.state, cfg, batch)?;
            }
        }
        Ok(())
    }

    fn checkpoint(&self, meta: ResumeMeta, seed: u64, template: &SlotTemplate) -> Checkpoint {
        let mut blocks = vec![
            ("actor".to_string(), self.actor.net().params().to_vec()),
            ("actor_adam_m".to_string(), self.state.actor_optimizer.m.clone()),
            ("actor_adam_v".to_string(), self.state.actor_optimizer.v.clone()),
        ];
        if let Some(c) = &self.critic {
            blocks.push(("critic".into(), c.net().params().to_vec()));
            if let Some(o) = &self.state.critic_optimizer {
                blocks.push(("critic_adam_m".into(), o.m.clone()));
                blocks.push(("critic_adam_v".into(), o.v.clone()));
            }
            // Replay rows share probability vectors batch by batch.
            let mut probs = Vec::new();
            let mut index = Vec::new();
            let mut actions = Vec::new();
            let mut rewards = Vec::new();
            let mut last: Option<*const Vec<f64>> = None;
            let mut n_vectors = 0usize;
            for e in self.replay.entries() {
                let ptr = std::sync::Arc::as_ptr(&e.probs);
                if last != Some(ptr) {
                    probs.extend_from_slice(&e.probs);
                    n_vectors += 1;
                    last = Some(ptr);
                }
                index.push((n_vectors - 1) as f64);
                actions.extend(e.actions.iter().map(|&a| a as f64));
                rewards.push(e.reward);
            }
            blocks.push(("replay_probs".into(), probs));
            blocks.push(("replay_index".into(), index));
            blocks.push(("replay_actions".into(), actions));
            blocks.push(("replay_rewards".into(), rewards));
        }
        let meta = serde_json::json!({
            "actor_layers": self.actor.net().layers(),
            "critic_layers": self.critic.as_ref().map(|c| c.net().layers().to_vec()),
            "template": template.describe(),
            "resume": meta,
        });
        Checkpoint { seed, meta, blocks }
    }

    fn restore(&mut self, ck: &Checkpoint, meta: &ResumeMeta, critic_lr: f64) -> Result<(), TrainerError> {
        let bad = |what: &str| TrainerError::Checkpoint(format!("checkpoint does not match this configuration ({what})"));
        let block = |name: &str| ck.block(name).map(<[f64]>::to_vec).ok_or_else(|| bad(name));
        if !self.actor.net_mut().set_params(block("actor")?) {
            return Err(bad("actor"));
        }
        let opt = &mut self.state.actor_optimizer;
        opt.m = block("actor_adam_m")?;
        opt.v = block("actor_adam_v")?;
        opt.t = meta.actor_steps;
        if opt.m.len() != opt.v.len() || opt.m.len() != self.actor.net().param_count() {
            return Err(bad("actor optimizer"));
        }
        self.state.baseline = meta.baseline;
        self.state.entropy_weight = meta.entropy_weight;
        self.state.skipped_steps = meta.skipped_steps;
        self.state.iteration = meta.iteration as u64;
        if let Some(critic) = &mut self.critic {
            if !critic.net_mut().set_params(block("critic")?) {
                return Err(bad("critic"));
            }
            if let Some(t) = meta.critic_steps {
                let mut o = crate::policy::Adam::new(critic.net().param_count(), critic_lr);
                o.m = block("critic_adam_m")?;
                o.v = block("critic_adam_v")?;
                o.t = t;
                self.state.critic_optimizer = Some(o);
            }
            let probs = block("replay_probs")?;
            let index = block("replay_index")?;
            let actions = block("replay_actions")?;
            let rewards = block("replay_rewards")?;
            let d = self.actor.action_dim();
            let s = self.actor.choice_counts().len();
            let mut shared: Vec<std::sync::Arc<Vec<f64>>> = Vec::new();
            for chunk in probs.chunks(d.max(1)) {
                shared.push(std::sync::Arc::new(chunk.to_vec()));
            }
            for (i, (&ix, &r)) in index.iter().zip(&rewards).enumerate() {
                let probs = shared.get(ix as usize).ok_or_else(|| bad("replay"))?;
                let a = actions.get(i * s..(i + 1) * s).ok_or_else(|| bad("replay"))?;
                self.replay.push(ReplayEntry {
                    probs: probs.clone(),
                    actions: a.iter().map(|&v| v as usize).collect(),
                    reward: r,
                });
            }
        }
        Ok(())
    }
}

fn elapsed(since: &mut Instant) -> f64 {
    let now = Instant::now();
    let dt = now.duration_since(*since).as_secs_f64();
    *since = now;
    dt
}

/// Sample, evaluate, update until `P(exact) >= threshold` or the iteration cap.
pub fn run_training(cfg: &RunConfig, out: Option<&Path>) -> Result<RunLog, TrainerError> {
    let problem = Problem::new(cfg)?;
    train(&problem, cfg.seed, out, false)
}

/// Training loop on a prepared problem. With `resume`, continues from the
/// checkpoint in `out` if there is one.
pub fn train(problem: &Problem, seed: u64, out: Option<&Path>, resume: bool) -> Result<RunLog, TrainerError> {
    let cfg = &problem.config;
    let mut learner = Learner::new(problem, seed);
    let mut records = Vec::new();
    let mut wall_times = Vec::new();
    let mut best = Best::default();
    let mut first_hit = None;
    let mut models = 0usize;
    let mut start_iteration = 1;
    let mut clock = Instant::now();

    let resumed = match (resume, out) {
        (true, Some(dir)) if dir.join(CHECKPOINT_FILE).exists() => {
            let f = std::io::BufReader::new(std::fs::File::open(dir.join(CHECKPOINT_FILE))?);
            let ck = Checkpoint::read(f)?;
            let meta: ResumeMeta = serde_json::from_value(ck.meta["resume"].clone())
                .map_err(|e| TrainerError::Checkpoint(e.to_string()))?;
            // The iteration budget may grow between sessions; nothing else may change.
            let same = RunConfig {
                max_iterations: cfg.max_iterations,
                ..meta.config.clone()
            } == *cfg;
            if ck.seed != seed || !same || meta.iteration > cfg.max_iterations {
                return Err(TrainerError::Checkpoint("checkpoint was written by a different run".into()));
            }
            learner.restore(&ck, &meta, cfg.policy.ddpg.critic_learning_rate)?;
            records = read_runlog(&dir.join(RUNLOG_FILE))?;
            records.retain(|r| r.iteration <= meta.iteration);
            wall_times = vec![0.0; records.len()];
            best = Best {
                reward: meta.best_reward,
                expression: meta.best_expression,
            };
            first_hit = meta.first_hit;
            models = meta.models_evaluated;
            start_iteration = meta.iteration + 1;
            true
        }
        _ => false,
    };

    let mut writer = match out {
        Some(dir) => {
            let mut w = RunWriter::create(dir, cfg, resumed)?;
            for r in &records {
                w.record(r, 0.0)?;
            }
            Some(w)
        }
        None => None,
    };

    let threshold = cfg.convergence.threshold;
    let mut status = RunStatus::NotConverged;
    let mut last_probability = None;

    if !resumed {
        let dist = learner.actor.forward()?;
        last_probability = problem.probability(&dist, seed, 0);
        let rec = IterationRecord {
            iteration: 0,
            models_evaluated: 0,
            total_reward: None,
            best_reward: None,
            best_expression: None,
            p_exact: None,
            p_exact_se: None,
            p_lower_bound: None,
            solver_runs: 0,
        }
        .with_probability(last_probability.as_ref());
        let wt = elapsed(&mut clock);
        if let Some(w) = &mut writer {
            w.record(&rec, wt)?;
        }
        records.push(rec);
        wall_times.push(wt);
        if last_probability.is_some_and(|p| p.estimate >= threshold) {
            status = RunStatus::Converged;
        }
    } else if let Some(r) = records.iter().rev().find(|r| r.p_exact.is_some()) {
        last_probability = Some(ProbabilityEstimate {
            estimate: r.p_exact.unwrap_or(0.0),
            std_error: r.p_exact_se.unwrap_or(0.0),
            lower_bound: r.p_lower_bound.unwrap_or(0.0),
            n_samples: cfg.convergence.n_samples,
        });
        if problem.target.is_some() && last_probability.is_some_and(|p| p.estimate >= threshold) {
            status = RunStatus::Converged;
        }
    }

    let mut iteration = start_iteration - 1;
    if status != RunStatus::Converged {
        for k in start_iteration..=cfg.max_iterations {
            iteration = k;
            let dist = learner.actor.forward()?;
            let mut rng = stream_rng(seed, STREAM_SAMPLE, k as u64);
            let samples = sample_from(&dist, &problem.template, cfg.m, &mut rng)?;
            let exprs: Vec<Expr> = samples.iter().map(|s| s.expr.clone()).collect();
            let batch = problem.env.evaluate_batch(&exprs);
            if first_hit.is_none() {
                first_hit = problem.find_hit(&samples, k, models);
            }
            models += samples.len();
            best.offer(&batch.records);
            if let Some(w) = &mut writer {
                w.evaluations(&batch.records)?;
            }
            let paired: Vec<(SampledAction, f64)> = samples
                .into_iter()
                .zip(&batch.records)
                .map(|(s, r)| (s, r.reward))
                .collect();
            learner.update(problem, &paired, seed, k)?;

            let probability = if k % cfg.convergence.cadence == 0 || k == cfg.max_iterations {
                let p = problem.probability(&learner.actor.forward()?, seed, k);
                last_probability = p.or(last_probability);
                p
            } else {
                None
            };
            let rec = IterationRecord {
                iteration: k,
                models_evaluated: models,
                total_reward: Some(batch.total_reward),
                best_reward: best.reward,
                best_expression: best.expression.clone(),
                p_exact: None,
                p_exact_se: None,
                p_lower_bound: None,
                solver_runs: batch.solver_runs,
            }
            .with_probability(probability.as_ref());
            let wt = elapsed(&mut clock);
            if let Some(w) = &mut writer {
                w.record(&rec, wt)?;
            }
            records.push(rec);
            wall_times.push(wt);

            let converged = match (&problem.target, probability) {
                (Some(_), Some(p)) => p.estimate >= threshold,
                (Some(_), None) => false,
                (None, _) => best.reward.is_some_and(|b| b >= cfg.convergence.reward_threshold),
            };
            if let (Some(dir), true) = (out, cfg.checkpoint_every > 0 && k % cfg.checkpoint_every == 0) {
                let meta = ResumeMeta {
                    iteration: k,
                    models_evaluated: models,
                    best_reward: best.reward,
                    best_expression: best.expression.clone(),
                    first_hit,
                    baseline: learner.state.baseline,
                    entropy_weight: learner.state.entropy_weight,
                    skipped_steps: learner.state.skipped_steps,
                    actor_steps: learner.state.actor_optimizer.t,
                    critic_steps: learner.state.critic_optimizer.as_ref().map(|o| o.t),
                    config: cfg.clone(),
                };
                let ck = learner.checkpoint(meta, seed, &problem.template);
                let tmp = dir.join(format!("{CHECKPOINT_FILE}.tmp"));
                ck.write(std::io::BufWriter::new(std::fs::File::create(&tmp)?))?;
                std::fs::rename(&tmp, dir.join(CHECKPOINT_FILE))?;
            }
            if converged {
                status = RunStatus::Converged;
                break;
            }
        }
    }

    let summary = RunSummary {
        kind: RunKind::Training,
        status,
        seed,
        iterations: iteration,
        models_evaluated: models,
        best_reward: best.reward,
        best_expression: best.expression,
        final_probability: last_probability,
        first_hit,
        skipped_steps: learner.state.skipped_steps,
        norm: cfg.reward.norm,
        config: cfg.clone(),
    };
    if let Some(w) = &mut writer {
        w.summary(&summary)?;
    }
    Ok(RunLog {
        records,
        summary,
        wall_times,
    })
}

/// Samples from the uniform policy without ever updating it.
pub fn run_random_search(cfg: &RunConfig, out: Option<&Path>) -> Result<RunLog, TrainerError> {
    let problem = Problem::new(cfg)?;
    random_search(&problem, cfg.seed, out)
}

pub fn random_search(problem: &Problem, seed: u64, out: Option<&Path>) -> Result<RunLog, TrainerError> {
    let cfg = &problem.config;
    let policy = Learner::new(problem, seed).actor;
    let dist = policy.forward()?;
    let mut writer = out.map(|dir| RunWriter::create(dir, cfg, false)).transpose()?;
    let mut clock = Instant::now();
    let mut records = Vec::new();
    let mut wall_times = Vec::new();
    let mut best = Best::default();
    let mut first_hit = None;
    let mut models = 0usize;
    let mut iteration = 0;
    for k in 1..=cfg.max_iterations {
        iteration = k;
        let mut rng = stream_rng(seed, STREAM_SAMPLE, k as u64);
        let samples = sample_from(&dist, &problem.template, cfg.m, &mut rng)?;
        if first_hit.is_none() {
            first_hit = problem.find_hit(&samples, k, models);
        }
        models += samples.len();
        let (total_reward, solver_runs) = if cfg.random_search.evaluate_rewards {
            let exprs: Vec<Expr> = samples.iter().map(|s| s.expr.clone()).collect();
            let batch = problem.env.evaluate_batch(&exprs);
            best.offer(&batch.records);
            if let Some(w) = &mut writer {
                w.evaluations(&batch.records)?;
            }
            (Some(batch.total_reward), batch.solver_runs)
        } else {
            (None, 0)
        };
        let rec = IterationRecord {
            iteration: k,
            models_evaluated: models,
            total_reward,
            best_reward: best.reward,
            best_expression: best.expression.clone(),
            p_exact: None,
            p_exact_se: None,
            p_lower_bound: None,
            solver_runs,
        };
        let wt = elapsed(&mut clock);
        if let Some(w) = &mut writer {
            w.record(&rec, wt)?;
        }
        records.push(rec);
        wall_times.push(wt);
        if first_hit.is_some() && cfg.random_search.stop_at_first_hit {
            break;
        }
    }
    let status = match (&problem.target, first_hit) {
        (None, _) => RunStatus::Completed,
        (Some(_), Some(_)) => RunStatus::Hit,
        (Some(_), None) => RunStatus::NoHitWithinBudget,
    };
    if let Some(dir) = out {
        let ck = Checkpoint {
            seed,
            meta: serde_json::json!({ "actor_layers": policy.net().layers(), "template": problem.template.describe() }),
            blocks: vec![("actor".into(), policy.net().params().to_vec())],
        };
        ck.write(std::io::BufWriter::new(std::fs::File::create(dir.join("policy.bin"))?))?;
    }
    let summary = RunSummary {
        kind: RunKind::RandomSearch,
        status,
        seed,
        iterations: iteration,
        models_evaluated: models,
        best_reward: best.reward,
        best_expression: best.expression,
        final_probability: None,
        first_hit,
        skipped_steps: 0,
        norm: cfg.reward.norm,
        config: cfg.clone(),
    };
    if let Some(w) = &mut writer {
        w.summary(&summary)?;
    }
    Ok(RunLog {
        records,
        summary,
        wall_times,
    })
}
