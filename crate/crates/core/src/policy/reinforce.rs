//! Score-function policy gradient with a moving-average baseline.

use super::actor::{PolicyParameters, SampledAction, SlotDistributions};
use super::mlp::Tape;
use super::{PolicyConfig, PolicyError, TrainingState, UpdateOutcome};

/// `(1/m) sum_i A_i log pi(a_i) + beta H` and its parameter gradient.
pub fn reinforce_objective(
    params: &PolicyParameters,
    batch: &[(&[usize], &[bool])],
    advantages: &[f64],
    entropy_weight: f64,
) -> Result<(f64, Vec<f64>), PolicyError> {
    let mut tape = Tape::default();
    let dist = params.forward_tape(&mut tape)?;
    let (value, grad_logits) = objective_logits(&dist, batch, advantages, entropy_weight);
    Ok((value, params.backprop_logits(&tape, &grad_logits)))
}

fn objective_logits(
    dist: &SlotDistributions,
    batch: &[(&[usize], &[bool])],
    advantages: &[f64],
    entropy_weight: f64,
) -> (f64, Vec<f64>) {
    let m = batch.len() as f64;
    let mut g = vec![0.0; dist.flat().len()];
    let mut value = 0.0;
    // sum_i A_i (onehot(a_is) - p_s) over used slots, accumulated per slot.
    let mut weight_per_slot = vec![0.0; dist.len()];
    for (&(actions, used), &adv) in batch.iter().zip(advantages) {
        let w = adv / m;
        value += w * dist.log_prob(actions, used);
        if w == 0.0 {
            continue;
        }
        for (s, (&a, &u)) in actions.iter().zip(used).enumerate() {
            if u {
                g[dist.offset(s) + a] += w;
                weight_per_slot[s] += w;
            }
        }
    }
    for (s, &w) in weight_per_slot.iter().enumerate() {
        if w != 0.0 {
            let o = dist.offset(s);
            for (k, &p) in dist.slot(s).iter().enumerate() {
                g[o + k] -= w * p;
            }
        }
    }
    if entropy_weight != 0.0 {
        value += entropy_weight * dist.entropy();
        for (gi, hi) in g.iter_mut().zip(dist.entropy_grad_logits()) {
            *gi += entropy_weight * hi;
        }
    }
    (value, g)
}

/// One ascent step on the batch; the baseline and entropy weight advance even
/// when a non-finite gradient forces the step to be skipped.
pub fn update_reinforce(
    params: &mut PolicyParameters,
    state: &mut TrainingState,
    config: &PolicyConfig,
    batch: &[(SampledAction, f64)],
) -> Result<UpdateOutcome, PolicyError> {
    if batch.is_empty() {
        return Err(PolicyError::EmptyBatch);
    }
    let mean = batch.iter().map(|(_, r)| r).sum::<f64>() / batch.len() as f64;
    let baseline = state.baseline.unwrap_or(mean);
    let advantages: Vec<f64> = batch.iter().map(|(_, r)| r - baseline).collect();
    let views: Vec<(&[usize], &[bool])> = batch
        .iter()
        .map(|(a, _)| (a.actions.as_slice(), a.used.as_slice()))
        .collect();
    let (_, grad) = reinforce_objective(params, &views, &advantages, state.entropy_weight)?;
    let applied = grad.iter().all(|g| g.is_finite());
    if applied {
        state.actor_optimizer.ascend(params.net_mut().params_mut(), &grad);
    } else {
        state.skipped_steps += 1;
    }
    state.baseline = Some(if state.baseline.is_some() {
        config.baseline_decay * baseline + (1.0 - config.baseline_decay) * mean
    } else {
        mean
    });
    state.entropy_weight *= config.entropy_decay;
    state.iteration += 1;
    Ok(UpdateOutcome {
        applied,
        grad_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
    })
}
