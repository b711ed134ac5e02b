use serde::{Deserialize, Serialize};

use crate::error::{CfxError, Result};
use crate::policy::DEFAULT_HIDDEN;
use crate::scalar::Scalar;

/// Search hyperparameters. Defaults: λ = 0.001, 100 episodes of at most 100
/// interventions, γ = 0.99, learning rate 1e-4, no weight decay, and a
/// 1000/100 policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default, deny_unknown_fields)]
pub struct SearchConfig<T> {
    pub proximity_weight: T,
    pub max_episodes: usize,
    pub max_interventions: usize,
    pub discount: T,
    pub learning_rate: T,
    pub weight_decay: T,
    pub enforce_plausibility: bool,
    pub seed: u64,
    pub hidden: [usize; 2],
}

impl<T: Scalar> Default for SearchConfig<T> {
    fn default() -> Self {
        Self {
            proximity_weight: T::lit(0.001),
            max_episodes: 100,
            max_interventions: 100,
            discount: T::lit(0.99),
            learning_rate: T::lit(1e-4),
            weight_decay: T::zero(),
            enforce_plausibility: false,
            seed: 0,
            hidden: DEFAULT_HIDDEN,
        }
    }
}

impl<T: Scalar> SearchConfig<T> {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_budget(mut self, max_episodes: usize, max_interventions: usize) -> Self {
        self.max_episodes = max_episodes;
        self.max_interventions = max_interventions;
        self
    }

    pub fn with_plausibility(mut self, enforce: bool) -> Self {
        self.enforce_plausibility = enforce;
        self
    }

    pub fn with_hidden(mut self, hidden: [usize; 2]) -> Self {
        self.hidden = hidden;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(CfxError::Config(msg));
        if !(self.proximity_weight >= T::zero()) {
            return fail(format!(
                "proximity weight must be >= 0, got {}",
                self.proximity_weight
            ));
        }
        if !(self.discount > T::zero() && self.discount <= T::one()) {
            return fail(format!(
                "discount must lie in (0, 1], got {}",
                self.discount
            ));
        }
        if self.max_episodes == 0 || self.max_interventions == 0 {
            return fail("episode and intervention budgets must be at least 1".into());
        }
        if !(self.learning_rate > T::zero()) || !(self.weight_decay >= T::zero()) {
            return fail("learning rate must be positive and weight decay non-negative".into());
        }
        if self.hidden.contains(&0) {
            return fail("hidden layer widths must be positive".into());
        }
        Ok(())
    }
}
