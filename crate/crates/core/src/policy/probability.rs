use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::actor::SlotDistributions;
use crate::dsl::{Expr, SlotTemplate, TargetMatcher};

pub const DEFAULT_PROBABILITY_SAMPLES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    /// Fraction of sampled models equivalent to the target.
    pub estimate: f64,
    /// Binomial standard error of `estimate`.
    pub std_error: f64,
    /// Probability of the target's canonical action alone; 0 when the target
    /// cannot be encoded.
    pub lower_bound: f64,
    pub n_samples: usize,
}

/// Monte Carlo probability that the frozen policy samples a model equivalent
/// to the matcher's target.
pub fn exact_probability<R: Rng + ?Sized>(
    dist: &SlotDistributions,
    target: &Expr,
    template: &SlotTemplate,
    matcher: &TargetMatcher,
    n_samples: usize,
    rng: &mut R,
) -> ProbabilityEstimate {
    // Samples that read the same slots with the same choices decode identically.
    let mut seen: HashMap<Vec<usize>, bool> = HashMap::new();
    let mut hits = 0usize;
    for _ in 0..n_samples {
        let actions = dist.sample(rng);
        let decoded = match template.decode_with_mask(&actions) {
            Ok(d) => d,
            Err(_) => continue,
        };
        let key: Vec<usize> = actions
            .iter()
            .zip(&decoded.used)
            .map(|(&a, &u)| if u { a } else { usize::MAX })
            .collect();
        let hit = *seen.entry(key).or_insert_with(|| matcher.matches(&decoded.expr));
        hits += hit as usize;
    }
    let n = n_samples.max(1) as f64;
    let p = hits as f64 / n;
    ProbabilityEstimate {
        estimate: p,
        std_error: (p * (1.0 - p) / n).sqrt(),
        lower_bound: canonical_probability(dist, target, template),
        n_samples,
    }
}

pub fn canonical_probability(dist: &SlotDistributions, target: &Expr, template: &SlotTemplate) -> f64 {
    let Ok(actions) = template.encode(target) else {
        return 0.0;
    };
    match template.used_slots(&actions) {
        Ok(used) => dist.probability(&actions, &used),
        Err(_) => 0.0,
    }
}
