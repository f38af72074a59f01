use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::numerics::{Field, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormWeighting {
    /// `sqrt(sum_i d_i^2)`
    PlainSum,
    /// `sqrt(h * sum_i d_i^2)`
    GridWeighted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub epsilon: f64,
    /// Error norm charged to candidates whose solution diverged.
    pub e_max: f64,
    pub norm: NormWeighting,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            e_max: 1e6,
            norm: NormWeighting::PlainSum,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(EnvError::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.e_max > 0.0 && self.e_max.is_finite()) {
            return Err(EnvError::Config(format!("e_max must be positive, got {}", self.e_max)));
        }
        Ok(())
    }

    /// Largest attainable reward, reached by an exact one-term model.
    pub fn max_reward(&self) -> f64 {
        2.0 / self.epsilon
    }
}

/// Accuracy plus simplicity: `1 / (error + eps) + (1 / eps) / n`.
pub fn reward_formula(error_norm: f64, n: usize, cfg: &RewardConfig) -> f64 {
    debug_assert!(n >= 1);
    1.0 / (error_norm + cfg.epsilon) + (1.0 / cfg.epsilon) / n as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormOutcome {
    pub value: f64,
    pub diverged: bool,
}

/// L2 distance between the reference and a model solution at the final time.
///
/// A non-finite model solution yields `e_max` with the diverged flag set.
pub fn error_norm(
    u_exact: &Field,
    u_model: &Field,
    grid: &Grid,
    cfg: &RewardConfig,
) -> Result<NormOutcome, EnvError> {
    u_exact.check_grid(grid)?;
    u_model.check_grid(grid)?;
    if !u_model.is_finite() {
        return Ok(NormOutcome {
            value: cfg.e_max,
            diverged: true,
        });
    }
    let sum: f64 = u_exact
        .values()
        .iter()
        .zip(u_model.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let value = match cfg.norm {
        NormWeighting::PlainSum => sum.sqrt(),
        NormWeighting::GridWeighted => (sum * grid.h()).sqrt(),
    };
    Ok(NormOutcome {
        value,
        diverged: false,
    })
}
