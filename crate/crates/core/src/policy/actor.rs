use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Mlp, Tape};
use super::PolicyError;
use crate::dsl::{Expr, SlotTemplate};

/// The actor sees the same input on every call.
pub const ACTOR_INPUT: [f64; 1] = [1.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActorConfig {
    pub width: usize,
    pub relu_layers: usize,
    pub sigmoid_layers: usize,
}

impl Default for ActorConfig {
    fn default() -> Self {
        Self {
            width: 100,
            relu_layers: 5,
            sigmoid_layers: 5,
        }
    }
}

/// Actor network plus the slot layout of its output head.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParameters {
    net: Mlp,
    counts: Vec<usize>,
    offsets: Vec<usize>,
    seed: u64,
}

fn slot_offsets(counts: &[usize]) -> Vec<usize> {
    counts
        .iter()
        .scan(0, |acc, &c| {
            let o = *acc;
            *acc += c;
            Some(o)
        })
        .collect()
}

/// Hidden layers drawn from `seed`; the head is zeroed so every slot starts uniform.
pub fn init_policy(seed: u64, template: &SlotTemplate, cfg: &ActorConfig) -> PolicyParameters {
    init_policy_for_counts(seed, template.choice_counts(), cfg)
}

pub fn init_policy_for_counts(seed: u64, counts: Vec<usize>, cfg: &ActorConfig) -> PolicyParameters {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: usize = counts.iter().sum();
    let mut widths = vec![ACTOR_INPUT.len()];
    let mut acts = Vec::new();
    for _ in 0..cfg.relu_layers {
        widths.push(cfg.width);
        acts.push(Activation::Relu);
    }
    for _ in 0..cfg.sigmoid_layers {
        widths.push(cfg.width);
        acts.push(Activation::Sigmoid);
    }
    widths.push(total);
    acts.push(Activation::Linear);
    let mut net = Mlp::from_widths(&widths, &acts, &mut rng);
    net.zero_last_layer();
    PolicyParameters {
        net,
        offsets: slot_offsets(&counts),
        counts,
        seed,
    }
}

impl PolicyParameters {
    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn choice_counts(&self) -> &[usize] {
        &self.counts
    }

    /// Total head size, the sum of the choice counts.
    pub fn action_dim(&self) -> usize {
        self.net.output_dim()
    }

    pub fn forward(&self) -> Result<SlotDistributions, PolicyError> {
        let mut tape = Tape::default();
        self.forward_tape(&mut tape)
    }

    pub fn forward_tape(&self, tape: &mut Tape) -> Result<SlotDistributions, PolicyError> {
        if !self.net.params().iter().all(|p| p.is_finite()) {
            return Err(PolicyError::NonFinite("actor parameters"));
        }
        self.net.forward_tape(&ACTOR_INPUT, tape);
        let logits = tape.output();
        let mut probs = Vec::with_capacity(logits.len());
        for (&o, &c) in self.offsets.iter().zip(&self.counts) {
            softmax_into(&logits[o..o + c], &mut probs);
        }
        if !probs.iter().all(|p| p.is_finite()) {
            return Err(PolicyError::NonFinite("slot probabilities"));
        }
        Ok(SlotDistributions {
            probs,
            offsets: self.offsets.clone(),
            counts: self.counts.clone(),
        })
    }

    /// Parameter gradient of `logits . grad_logits` at the recorded pass.
    pub fn backprop_logits(&self, tape: &Tape, grad_logits: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.net.param_count()];
        self.net.backward(tape, grad_logits, &mut g);
        g
    }
}

fn softmax_into(z: &[f64], out: &mut Vec<f64>) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let start = out.len();
    let mut sum = 0.0;
    for &zi in z {
        let e = (zi - max).exp();
        sum += e;
        out.push(e);
    }
    for p in &mut out[start..] {
        *p /= sum;
    }
}

/// Per-slot categorical distributions, stored back to back.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotDistributions {
    probs: Vec<f64>,
    offsets: Vec<usize>,
    counts: Vec<usize>,
}

impl SlotDistributions {
    pub fn from_flat(probs: Vec<f64>, counts: Vec<usize>) -> Self {
        assert_eq!(probs.len(), counts.iter().sum::<usize>());
        Self {
            probs,
            offsets: slot_offsets(&counts),
            counts,
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn slot(&self, s: usize) -> &[f64] {
        &self.probs[self.offsets[s]..self.offsets[s] + self.counts[s]]
    }

    pub fn offset(&self, s: usize) -> usize {
        self.offsets[s]
    }

    /// All slot vectors concatenated.
    pub fn flat(&self) -> &[f64] {
        &self.probs
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Draws one index per slot, consuming one uniform variate per slot.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        (0..self.len())
            .map(|s| {
                let p = self.slot(s);
                let r: f64 = rng.random();
                let mut acc = 0.0;
                for (k, &pk) in p.iter().enumerate() {
                    acc += pk;
                    if r < acc {
                        return k;
                    }
                }
                // Rounding left `r` above the cumulative sum; take the last non-empty choice.
                p.iter().rposition(|&pk| pk > 0.0).unwrap_or(p.len() - 1)
            })
            .collect()
    }

    /// Sum of log-probabilities of the chosen entries over the masked slots.
    pub fn log_prob(&self, actions: &[usize], used: &[bool]) -> f64 {
        actions
            .iter()
            .zip(used)
            .enumerate()
            .filter(|(_, (_, &u))| u)
            .map(|(s, (&a, _))| self.slot(s)[a].ln())
            .sum()
    }

    /// Product of the chosen entries over the masked slots.
    pub fn probability(&self, actions: &[usize], used: &[bool]) -> f64 {
        actions
            .iter()
            .zip(used)
            .enumerate()
            .filter(|(_, (_, &u))| u)
            .map(|(s, (&a, _))| self.slot(s)[a])
            .product()
    }

    /// Summed Shannon entropy of all slots.
    pub fn entropy(&self) -> f64 {
        self.probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
    }

    /// Gradient of the summed entropy with respect to the logits.
    pub fn entropy_grad_logits(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.probs.len()];
        for s in 0..self.len() {
            let p = self.slot(s);
            let h: f64 = p.iter().filter(|&&q| q > 0.0).map(|&q| -q * q.ln()).sum();
            let o = self.offsets[s];
            for (k, &pk) in p.iter().enumerate() {
                if pk > 0.0 {
                    g[o + k] = -pk * (pk.ln() + h);
                }
            }
        }
        g
    }

    /// Maps a gradient with respect to the probabilities to one with respect to the logits.
    pub fn softmax_backward(&self, grad_probs: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.probs.len()];
        for s in 0..self.len() {
            let o = self.offsets[s];
            let p = self.slot(s);
            let gp = &grad_probs[o..o + p.len()];
            let dot: f64 = p.iter().zip(gp).map(|(a, b)| a * b).sum();
            for k in 0..p.len() {
                g[o + k] = p[k] * (gp[k] - dot);
            }
        }
        g
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledAction {
    pub actions: Vec<usize>,
    /// Slots the decoded expression reads.
    pub used: Vec<bool>,
    pub log_prob: f64,
    pub expr: Expr,
}

/// `m` independent draws from the policy, decoded through `template`.
pub fn sample_models<R: Rng + ?Sized>(
    params: &PolicyParameters,
    template: &SlotTemplate,
    m: usize,
    rng: &mut R,
) -> Result<Vec<SampledAction>, PolicyError> {
    let dist = params.forward()?;
    sample_from(&dist, template, m, rng)
}

pub fn sample_from<R: Rng + ?Sized>(
    dist: &SlotDistributions,
    template: &SlotTemplate,
    m: usize,
    rng: &mut R,
) -> Result<Vec<SampledAction>, PolicyError> {
    (0..m)
        .map(|_| {
            let actions = dist.sample(rng);
            let decoded = template.decode_with_mask(&actions)?;
            Ok(SampledAction {
                log_prob: dist.log_prob(&actions, &decoded.used),
                used: decoded.used,
                expr: decoded.expr,
                actions,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{build_vocabulary, TemplateLimits, VocabularyConfig};

    fn template() -> SlotTemplate {
        let vocab = build_vocabulary(&VocabularyConfig {
            operands: vec!["u".into(), "x".into()],
            integers: vec![2],
            reciprocals: vec![2],
            ..Default::default()
        })
        .unwrap();
        SlotTemplate::new(&vocab, TemplateLimits { n_max: 2, max_depth: 2 }).unwrap()
    }

    fn small() -> ActorConfig {
        ActorConfig {
            width: 8,
            relu_layers: 2,
            sigmoid_layers: 2,
        }
    }

    #[test]
    fn starts_uniform() {
        let t = template();
        let p = init_policy(7, &t, &ActorConfig::default());
        let d = p.forward().unwrap();
        for (s, &c) in t.choice_counts().iter().enumerate() {
            for &q in d.slot(s) {
                assert!((q - 1.0 / c as f64).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn seeds_change_hidden_layers_only() {
        let t = template();
        let a = init_policy(1, &t, &small());
        let b = init_policy(1, &t, &small());
        let c = init_policy(2, &t, &small());
        assert_eq!(a, b);
        assert_ne!(a.net().params(), c.net().params());
        assert_eq!(a.forward().unwrap(), c.forward().unwrap());
    }

    #[test]
    fn large_logit_saturates() {
        let t = template();
        let mut p = init_policy(3, &t, &small());
        let n = p.net().param_count();
        // Bias of head output 1, which is choice 1 of slot 0.
        let total = p.action_dim();
        p.net_mut().params_mut()[n - total + 1] = 50.0;
        let d = p.forward().unwrap();
        assert!(d.slot(0)[1] > 1.0 - 1e-12);
        for s in 0..d.len() {
            assert!((d.slot(s).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn nonfinite_weights_are_errors() {
        let t = template();
        let mut p = init_policy(3, &t, &small());
        p.net_mut().params_mut()[0] = f64::NAN;
        assert!(p.forward().is_err());
    }

    #[test]
    fn one_hot_policy_repeats() {
        let d = SlotDistributions::from_flat(vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0], vec![3, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(d.sample(&mut rng), vec![1, 2]);
        }
    }

    #[test]
    fn stored_log_prob_matches_recomputation() {
        let t = template();
        let mut p = init_policy(5, &t, &small());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for v in p.net_mut().params_mut().iter_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
        let batch = sample_models(&p, &t, 50, &mut rng).unwrap();
        let d = p.forward().unwrap();
        for s in &batch {
            let used = t.used_slots(&s.actions).unwrap();
            assert!((d.log_prob(&s.actions, &used) - s.log_prob).abs() <= 1e-10);
            assert_eq!(t.decode(&s.actions).unwrap(), s.expr);
        }
        let a = sample_models(&p, &t, 50, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = sample_models(&p, &t, 50, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_frequencies_within_four_sigma() {
        let d = SlotDistributions::from_flat(vec![0.25; 4], vec![4]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[d.sample(&mut rng)[0]] += 1;
        }
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * 0.25).abs() <= 4.0 * sigma);
        }
    }

    #[test]
    fn entropy_gradient_matches_finite_differences() {
        let z = [0.3, -1.2, 0.5, 2.0, 0.0];
        let counts = vec![3, 2];
        let probs_of = |z: &[f64]| {
            let mut p = Vec::new();
            softmax_into(&z[..3], &mut p);
            softmax_into(&z[3..], &mut p);
            SlotDistributions::from_flat(p, counts.clone())
        };
        let g = probs_of(&z).entropy_grad_logits();
        for k in 0..5 {
            let mut zp = z;
            zp[k] += 1e-6;
            let mut zm = z;
            zm[k] -= 1e-6;
            let fd = (probs_of(&zp).entropy() - probs_of(&zm).entropy()) / 2e-6;
            assert!((fd - g[k]).abs() < 1e-8);
        }
    }
}
