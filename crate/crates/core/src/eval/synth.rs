use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CfxError, Result};
use crate::models::ThresholdRuleModel;
use crate::sample::{NamedSample, SeriesSample};
use crate::scalar::Scalar;

/// Shape and noise of a synthetic Gaussian dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SynthSpec<T> {
    pub steps: usize,
    pub features: usize,
    pub n_samples: usize,
    /// Standard deviation of every cell around zero.
    pub noise: T,
    pub seed: u64,
}

impl<T: Scalar> SynthSpec<T> {
    pub fn new(steps: usize, features: usize, n_samples: usize, seed: u64) -> Self {
        Self {
            steps,
            features,
            n_samples,
            noise: T::one(),
            seed,
        }
    }
}

/// Draws `n_samples` series with i.i.d. `N(0, noise²)` cells and labels each
/// with `rule`. Sample ids are `s0`, `s1`, ...
pub fn synth_dataset<T: Scalar>(
    spec: &SynthSpec<T>,
    rule: &ThresholdRuleModel<T>,
) -> Result<Vec<NamedSample<T>>> {
    if spec.n_samples == 0 {
        return Err(CfxError::Config(
            "synthetic dataset needs at least one sample".into(),
        ));
    }
    if !(spec.noise.is_finite() && spec.noise >= T::zero()) {
        return Err(CfxError::Config(format!(
            "noise must be finite and non-negative, got {}",
            spec.noise
        )));
    }
    let probe = SeriesSample::zeros(spec.steps, spec.features)?;
    rule.check_sample(&probe)?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.n_samples)
        .map(|i| {
            let values = (0..spec.steps * spec.features)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    spec.noise * T::lit(z)
                })
                .collect();
            let sample = SeriesSample::new(spec.steps, spec.features, values)?;
            let label = rule.predict_label(&sample)?;
            Ok(NamedSample::new(format!("s{i}"), sample, Some(label)))
        })
        .collect()
}
