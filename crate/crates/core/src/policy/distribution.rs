use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Gaussian normalising constant `0.5 * ln(2π)`.
pub(crate) const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_7;

#[derive(Clone, Debug, PartialEq)]
pub struct Categorical<T> {
    probs: Vec<T>,
    log_probs: Vec<T>,
}

impl<T: Scalar> Categorical<T> {
    /// Softmax computed in log space.
    pub fn from_logits(logits: &[T]) -> Self {
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let log_norm = max + logits.iter().map(|&l| (l - max).exp()).sum::<T>().ln();
        let log_probs: Vec<T> = logits.iter().map(|&l| l - log_norm).collect();
        let probs = log_probs.iter().map(|l| l.exp()).collect();
        Self { probs, log_probs }
    }

    /// Takes probabilities as given; zero entries get `-inf` log-probability.
    pub fn from_probs(probs: Vec<T>) -> Self {
        let log_probs = probs.iter().map(|p| p.ln()).collect();
        Self { probs, log_probs }
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn log_prob(&self, index: usize) -> T {
        self.log_probs[index]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut cumulative = 0.0;
        let mut last_positive = 0;
        for (i, p) in self.probs.iter().enumerate() {
            let p = p.as_f64();
            if p > 0.0 {
                last_positive = i;
            }
            cumulative += p;
            if u < cumulative {
                return i;
            }
        }
        // rounding left the cumulative sum just under one
        last_positive
    }
}

/// Distribution of the intervention value for one actionable feature.
#[derive(Clone, Debug, PartialEq)]
pub enum ValueDistribution<T> {
    Normal { mean: T, std: T },
    Categorical(Categorical<T>),
}

/// What an action does to its feature from the chosen step onward.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    content = "value",
    rename_all = "snake_case",
    bound = "T: Scalar"
)]
pub enum Intervention<T> {
    /// Added to a continuous feature.
    Shift(T),
    /// Category code written into a discrete feature.
    Assign(usize),
}

/// `(time step, actionable-feature index, strength or value)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ActionTriple<T> {
    pub step: usize,
    /// Index into the ascending list of actionable features.
    pub slot: usize,
    pub intervention: Intervention<T>,
}

/// The factored action distribution produced by the policy.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionParams<T> {
    pub time: Categorical<T>,
    pub feature: Categorical<T>,
    /// One entry per actionable feature, in slot order.
    pub values: Vec<ValueDistribution<T>>,
}

impl<T: Scalar> DistributionParams<T> {
    pub fn means(&self) -> Vec<T> {
        self.values
            .iter()
            .filter_map(|v| match v {
                ValueDistribution::Normal { mean, .. } => Some(*mean),
                ValueDistribution::Categorical(_) => None,
            })
            .collect()
    }

    pub fn stds(&self) -> Vec<T> {
        self.values
            .iter()
            .filter_map(|v| match v {
                ValueDistribution::Normal { std, .. } => Some(*std),
                ValueDistribution::Categorical(_) => None,
            })
            .collect()
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, rng: &mut R) -> ActionTriple<T> {
        let step = self.time.sample(rng);
        let slot = self.feature.sample(rng);
        let intervention = match &self.values[slot] {
            ValueDistribution::Normal { mean, std } => {
                let z: f64 = StandardNormal.sample(rng);
                Intervention::Shift(*mean + *std * T::lit(z))
            }
            ValueDistribution::Categorical(c) => Intervention::Assign(c.sample(rng)),
        };
        ActionTriple {
            step,
            slot,
            intervention,
        }
    }

    /// `ln p(step) + ln p(slot) + ln p(value | slot)`; `-inf` when the action
    /// has zero probability or does not fit the slot's value type.
    pub fn log_prob(&self, action: &ActionTriple<T>) -> T {
        if action.step >= self.time.len() || action.slot >= self.feature.len() {
            return T::neg_infinity();
        }
        let value = match (&self.values[action.slot], action.intervention) {
            (ValueDistribution::Normal { mean, std }, Intervention::Shift(a)) => {
                let z = (a - *mean) / *std;
                -T::lit(HALF_LN_TWO_PI) - std.ln() - T::lit(0.5) * z * z
            }
            (ValueDistribution::Categorical(c), Intervention::Assign(v)) if v < c.len() => {
                c.log_prob(v)
            }
            _ => return T::neg_infinity(),
        };
        self.time.log_prob(action.step) + self.feature.log_prob(action.slot) + value
    }
}
