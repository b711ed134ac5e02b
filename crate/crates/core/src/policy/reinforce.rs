use serde::{Deserialize, Serialize};

use crate::error::{CfxError, Result};
use crate::sample::SeriesSample;
use crate::scalar::Scalar;

use super::adam::Adam;
use super::distribution::ActionTriple;
use super::network::{ForwardCache, PolicyNetwork};

/// `(x_t, a_t, R_{t+1})`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Step<T> {
    pub state: SeriesSample<T>,
    pub action: ActionTriple<T>,
    pub reward: T,
}

/// `G_t = sum_{t' = t+1..T} γ^(t'-t-1) R_t'`, with `rewards[t]` holding `R_{t+1}`.
pub fn discounted_returns<T: Scalar>(rewards: &[T], discount: T) -> Vec<T> {
    let mut returns = vec![T::zero(); rewards.len()];
    let mut running = T::zero();
    for (t, &r) in rewards.iter().enumerate().rev() {
        running = r + discount * running;
        returns[t] = running;
    }
    returns
}

/// Applies one Adam step per time step `t` on the loss
/// `-γ^t G_t ln π(a_t | x_t)`, in order. Steps whose weight `γ^t G_t` is
/// zero are skipped, so an all-zero-reward trajectory leaves the policy
/// untouched.
///
/// On a non-finite gradient or parameter, the policy and optimizer are
/// restored to their state before the call.
pub fn reinforce_update<T: Scalar>(
    policy: &mut PolicyNetwork<T>,
    optimizer: &mut Adam<T>,
    trajectory: &[Step<T>],
    discount: T,
) -> Result<usize> {
    if trajectory.is_empty() {
        return Err(CfxError::State(
            "cannot update from an empty trajectory".into(),
        ));
    }
    let rewards: Vec<T> = trajectory.iter().map(|s| s.reward).collect();
    let returns = discounted_returns(&rewards, discount);
    if returns.iter().all(|g| *g == T::zero()) {
        return Ok(0);
    }

    let saved = (policy.clone(), optimizer.clone());
    let mut grad = vec![T::zero(); policy.params().len()];
    let mut cache = ForwardCache::default();
    let mut applied = 0;
    let mut weight = T::one();
    for (step, &g) in trajectory.iter().zip(&returns) {
        let scale = weight * g;
        weight *= discount;
        if scale == T::zero() {
            continue;
        }
        grad.iter_mut().for_each(|x| *x = T::zero());
        // descend on the negated objective
        let outcome = policy
            .accumulate_log_prob_grad(&step.state, &step.action, -scale, &mut grad, &mut cache)
            .and_then(|_| {
                if grad.iter().all(|x| x.is_finite()) {
                    Ok(())
                } else {
                    Err(CfxError::Numeric("non-finite policy gradient".into()))
                }
            })
            .and_then(|_| optimizer.step(policy.params_mut(), &grad))
            .and_then(|_| {
                if policy.is_finite() {
                    Ok(())
                } else {
                    Err(CfxError::Numeric(
                        "policy parameters became non-finite".into(),
                    ))
                }
            });
        if let Err(e) = outcome {
            *policy = saved.0;
            *optimizer = saved.1;
            return Err(e);
        }
        applied += 1;
    }
    Ok(applied)
}
