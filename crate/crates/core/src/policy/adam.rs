use serde::{Deserialize, Serialize};

use crate::error::{CfxError, Result};
use crate::scalar::Scalar;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Adam with L2 weight decay folded into the gradient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Adam<T> {
    pub learning_rate: T,
    pub weight_decay: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    first_moment: Vec<T>,
    second_moment: Vec<T>,
    steps: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn parameter_count(&self) -> usize {
        self.first_moment.len()
    }

    pub fn new(parameter_count: usize, learning_rate: T, weight_decay: T) -> Self {
        Self {
            learning_rate,
            weight_decay,
            beta1: T::lit(ADAM_BETA1),
            beta2: T::lit(ADAM_BETA2),
            epsilon: T::lit(ADAM_EPSILON),
            first_moment: vec![T::zero(); parameter_count],
            second_moment: vec![T::zero(); parameter_count],
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One descent step on `params` along the loss gradient `grad`.
    pub fn step(&mut self, params: &mut [T], grad: &[T]) -> Result<()> {
        if params.len() != self.first_moment.len() || grad.len() != params.len() {
            return Err(CfxError::dim(format!(
                "optimizer tracks {} parameters, got {} parameters and {} gradients",
                self.first_moment.len(),
                params.len(),
                grad.len()
            )));
        }
        self.steps += 1;
        let t = self.steps as i32;
        let (b1, b2) = (self.beta1, self.beta2);
        let step_size = self.learning_rate / (T::one() - b1.powi(t));
        let bias2 = T::one() / (T::one() - b2.powi(t));
        let (one_minus_b1, one_minus_b2) = (T::one() - b1, T::one() - b2);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            let g = g + self.weight_decay * *p;
            *m = b1 * *m + one_minus_b1 * g;
            *v = b2 * *v + one_minus_b2 * g * g;
            *p -= step_size * *m / ((*v * bias2).sqrt() + self.epsilon);
        }
        Ok(())
    }
}
