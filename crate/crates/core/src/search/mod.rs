//! The counterfactual search: policy rollouts over perturbation actions,
//! constraint enforcement, reward shaping, and selection of the closest
//! valid counterfactual.

mod config;
mod report;

pub use config::SearchConfig;
pub use report::{EpisodeOutcome, EpisodeTrace, SearchReport};

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::{apply_constraints, ConstraintSet};
use crate::distance::{proximity, sparsity, SPARSITY_TOLERANCE};
use crate::error::{CfxError, Result};
use crate::models::{PlausibilityCheck, PredictiveModel};
use crate::policy::{reinforce_update, ActionTriple, Adam, Intervention, PolicyNetwork, Step};
use crate::sample::SeriesSample;
use crate::scalar::Scalar;
use crate::schema::{ActionLayout, FeatureSchema};
use crate::target::TargetSpec;

/// Everything about a counterfactual query except the input itself.
#[derive(Clone, Debug)]
pub struct Problem<T> {
    pub schema: FeatureSchema<T>,
    pub constraints: ConstraintSet<T>,
    pub target: TargetSpec<T>,
}

impl<T: Scalar> Problem<T> {
    pub fn new(
        schema: FeatureSchema<T>,
        constraints: ConstraintSet<T>,
        target: TargetSpec<T>,
    ) -> Result<Self> {
        constraints.validate(&schema)?;
        target.validate()?;
        Ok(Self {
            schema,
            constraints,
            target,
        })
    }

    pub fn unconstrained(schema: FeatureSchema<T>, target: TargetSpec<T>) -> Result<Self> {
        Self::new(schema, ConstraintSet::none(), target)
    }
}

/// Applies an action: a continuous feature is shifted by the intervention
/// from the chosen step to the end, a discrete feature is overwritten with
/// the chosen category over the same span.
pub fn transition<T: Scalar>(
    state: &SeriesSample<T>,
    action: &ActionTriple<T>,
    layout: &ActionLayout,
) -> SeriesSample<T> {
    let feature = layout.slots[action.slot].feature;
    let mut next = state.clone();
    for k in action.step..state.steps() {
        let value = match action.intervention {
            Intervention::Shift(delta) => state.get(k, feature) + delta,
            Intervention::Assign(code) => T::from_count(code),
        };
        next.set(k, feature, value);
    }
    next
}

/// `1 - λ·proximity` when the prediction meets the target, else zero.
pub fn reward<T: Scalar>(
    prediction: T,
    target: &TargetSpec<T>,
    proximity: T,
    proximity_weight: T,
) -> T {
    if target.is_satisfied(prediction) {
        T::one() - proximity_weight * proximity
    } else {
        T::zero()
    }
}

/// Mutable learner state carried across episodes of one search.
#[derive(Clone, Debug, PartialEq)]
pub struct Learner<T> {
    pub policy: PolicyNetwork<T>,
    pub optimizer: Adam<T>,
    pub rng: ChaCha8Rng,
}

/// Serializable learner snapshot: policy parameters, optimizer moments, and
/// the sampling stream position, enough to resume a search exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LearnerCheckpoint<T> {
    pub policy: PolicyNetwork<T>,
    pub optimizer: Adam<T>,
    pub rng_seed: [u8; 32],
    pub rng_stream: u64,
    pub rng_word_pos: u128,
}

impl<T: Scalar> From<&Learner<T>> for LearnerCheckpoint<T> {
    fn from(learner: &Learner<T>) -> Self {
        Self {
            policy: learner.policy.clone(),
            optimizer: learner.optimizer.clone(),
            rng_seed: learner.rng.get_seed(),
            rng_stream: learner.rng.get_stream(),
            rng_word_pos: learner.rng.get_word_pos(),
        }
    }
}

impl<T: Scalar> TryFrom<LearnerCheckpoint<T>> for Learner<T> {
    type Error = CfxError;

    fn try_from(c: LearnerCheckpoint<T>) -> Result<Self> {
        if c.optimizer.parameter_count() != c.policy.params().len() {
            return Err(CfxError::dim(
                "optimizer state does not match the policy parameters",
            ));
        }
        let mut rng = ChaCha8Rng::from_seed(c.rng_seed);
        rng.set_stream(c.rng_stream);
        rng.set_word_pos(c.rng_word_pos);
        Ok(Self {
            policy: c.policy,
            optimizer: c.optimizer,
            rng,
        })
    }
}

impl<T: Scalar> Learner<T> {
    /// Seeded policy initialisation; sampling continues on the same stream.
    pub fn new(layout: ActionLayout, config: &SearchConfig<T>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let policy = PolicyNetwork::new(layout, config.hidden, &mut rng);
        let optimizer = Adam::new(
            policy.params().len(),
            config.learning_rate,
            config.weight_decay,
        );
        Self {
            policy,
            optimizer,
            rng,
        }
    }
}

/// Shared inputs of one search.
pub struct Episode<'a, T: Scalar> {
    pub model: &'a dyn PredictiveModel<T>,
    pub problem: &'a Problem<T>,
    pub original: &'a SeriesSample<T>,
    pub config: &'a SearchConfig<T>,
    /// Active plausibility gate, if any.
    pub gate: Option<&'a dyn PlausibilityCheck<T>>,
}

impl<T: Scalar> Episode<'_, T> {
    /// Rolls out up to `max_interventions` actions from the original input,
    /// stopping at the first valid counterfactual not already in `found`,
    /// then updates the policy from the recorded trajectory.
    pub fn run(
        &self,
        learner: &mut Learner<T>,
        found: &mut Vec<SeriesSample<T>>,
    ) -> Result<EpisodeTrace<T>> {
        let schema = &self.problem.schema;
        let layout = learner.policy.layout().clone();
        let mut state = self.original.clone();
        let mut trajectory: Vec<Step<T>> = Vec::new();
        let mut outcome = EpisodeOutcome::Exhausted;

        for _ in 0..self.config.max_interventions {
            let dist = learner.policy.forward(&state)?;
            let action = dist.sample_action(&mut learner.rng);
            let moved = transition(&state, &action, &layout);
            let next = apply_constraints(&moved, self.original, &self.problem.constraints, schema);
            let prediction = self.model.predict(&next)?;
            let valid = self.problem.target.is_satisfied(prediction);
            let prox = proximity(self.original, &next, schema)?;
            let r = reward(
                prediction,
                &self.problem.target,
                prox,
                self.config.proximity_weight,
            );
            trajectory.push(Step {
                state,
                action,
                reward: r,
            });
            if valid && !found.contains(&next) {
                let plausible = match self.gate {
                    Some(gate) => gate.is_plausible(&next)?,
                    None => true,
                };
                if plausible {
                    found.push(next);
                    outcome = EpisodeOutcome::Found;
                } else {
                    outcome = EpisodeOutcome::Implausible;
                }
                break;
            }
            state = next;
        }

        let reward_sum = trajectory.iter().map(|s| s.reward).sum();
        let interventions = trajectory.len();
        let update_failed = match reinforce_update(
            &mut learner.policy,
            &mut learner.optimizer,
            &trajectory,
            self.config.discount,
        ) {
            Ok(_) => false,
            Err(CfxError::Numeric(msg)) => {
                warn!("discarding episode update: {msg}");
                true
            }
            Err(e) => return Err(e),
        };
        Ok(EpisodeTrace {
            interventions,
            reward_sum,
            outcome,
            update_failed,
        })
    }
}

/// Index of the smallest proximity; the earliest entry wins ties.
pub fn closest_index<T: Scalar>(proximities: &[T]) -> Option<usize> {
    proximities
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, T)>, (i, &p)| match best {
            Some((_, bp)) if bp <= p => best,
            _ => Some((i, p)),
        })
        .map(|(i, _)| i)
}

/// Searches for the closest valid counterfactual of `original`.
///
/// Only the model's predictions on `original` and its perturbations are
/// used. With `config.enforce_plausibility` set and a detector supplied,
/// counterfactuals the detector rejects are not kept.
pub fn generate<T: Scalar>(
    model: &dyn PredictiveModel<T>,
    problem: &Problem<T>,
    original: &SeriesSample<T>,
    config: &SearchConfig<T>,
    detector: Option<&dyn PlausibilityCheck<T>>,
) -> Result<SearchReport<T>> {
    config.validate()?;
    problem.schema.validate_sample(original)?;
    let mut learner = Learner::new(problem.schema.action_layout(original.steps()), config);
    generate_with(model, problem, original, config, detector, &mut learner)
}

/// [`generate`] continuing from an existing learner, which is left in its
/// post-search state. The learner's seed takes precedence over
/// `config.seed`.
pub fn generate_with<T: Scalar>(
    model: &dyn PredictiveModel<T>,
    problem: &Problem<T>,
    original: &SeriesSample<T>,
    config: &SearchConfig<T>,
    detector: Option<&dyn PlausibilityCheck<T>>,
    learner: &mut Learner<T>,
) -> Result<SearchReport<T>> {
    config.validate()?;
    problem.schema.validate_sample(original)?;
    problem.constraints.validate(&problem.schema)?;
    if *learner.policy.layout() != problem.schema.action_layout(original.steps()) {
        return Err(CfxError::dim(
            "learner was built for a different input shape or schema",
        ));
    }

    let initial = model.predict(original)?;
    if problem.target.is_satisfied(initial) {
        return Ok(SearchReport::already_satisfied(original.clone()));
    }

    let gate = if config.enforce_plausibility {
        if detector.is_none() {
            warn!("plausibility enforcement requested without a detector; gate disabled");
        }
        detector
    } else {
        None
    };

    let episode = Episode {
        model,
        problem,
        original,
        config,
        gate,
    };
    let mut found = Vec::new();
    let mut episodes = Vec::with_capacity(config.max_episodes);
    for e in 0..config.max_episodes {
        let trace = episode.run(learner, &mut found)?;
        debug!(
            "episode {e}: {} interventions, outcome {:?}",
            trace.interventions, trace.outcome
        );
        episodes.push(trace);
    }

    let proximities = found
        .iter()
        .map(|c| proximity(original, c, &problem.schema))
        .collect::<Result<Vec<T>>>()?;
    let best_index = closest_index(&proximities);
    let best_sparsity = best_index
        .map(|i| sparsity(original, &found[i], T::lit(SPARSITY_TOLERANCE)))
        .transpose()?;

    Ok(SearchReport {
        succeeded: best_index.is_some(),
        already_satisfied: false,
        best: best_index.map(|i| found[i].clone()),
        best_proximity: best_index.map(|i| proximities[i]),
        best_sparsity,
        episodes_run: episodes.len(),
        total_interventions: episodes.iter().map(|e| e.interventions).sum(),
        cfe_proximities: proximities,
        cfe_set: found,
        episodes,
    })
}
