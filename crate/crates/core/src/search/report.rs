use serde::{Deserialize, Serialize};

use crate::sample::SeriesSample;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeOutcome {
    /// A new valid counterfactual was added.
    Found,
    /// A new valid candidate was rejected by the plausibility gate.
    Implausible,
    /// The intervention budget ran out.
    Exhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EpisodeTrace<T> {
    pub interventions: usize,
    pub reward_sum: T,
    pub outcome: EpisodeOutcome,
    /// The policy update hit a numeric error and was rolled back.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub update_failed: bool,
}

impl<T> EpisodeTrace<T> {
    pub fn found(&self) -> bool {
        self.outcome == EpisodeOutcome::Found
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SearchReport<T> {
    pub succeeded: bool,
    /// The input already met the target; no search ran.
    pub already_satisfied: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best: Option<SeriesSample<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_proximity: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_sparsity: Option<usize>,
    pub episodes_run: usize,
    pub total_interventions: usize,
    /// Proximity of each member of `cfe_set`, same order.
    pub cfe_proximities: Vec<T>,
    /// Valid counterfactuals in insertion order.
    pub cfe_set: Vec<SeriesSample<T>>,
    pub episodes: Vec<EpisodeTrace<T>>,
}

impl<T: Scalar> SearchReport<T> {
    pub fn already_satisfied(original: SeriesSample<T>) -> Self {
        Self {
            succeeded: true,
            already_satisfied: true,
            best: Some(original.clone()),
            best_proximity: Some(T::zero()),
            best_sparsity: Some(0),
            episodes_run: 0,
            total_interventions: 0,
            cfe_proximities: vec![T::zero()],
            cfe_set: vec![original],
            episodes: Vec::new(),
        }
    }
}
