//! Black-box model interface, the rule-based and KNN fixture models, and the
//! LOF in-distribution detector.

mod catalog;
mod knn;
mod lof;
mod rule;

pub use catalog::{build_rule_model, dataset_shape, DATASET_IDS};
pub use knn::KnnModel;
pub use lof::{LofDetector, DEFAULT_LOF_NEIGHBORS, DEFAULT_LOF_THRESHOLD};
pub use rule::{Comparator, Condition, RuleExpr, ThresholdRuleModel};

use crate::error::Result;
use crate::sample::SeriesSample;
use crate::scalar::Scalar;

/// A model the engine may only query.
///
/// Classifiers return their label as a real; regressors return the scalar
/// output. `predict` must be deterministic for a fixed instance.
pub trait PredictiveModel<T: Scalar>: Send + Sync {
    fn predict(&self, sample: &SeriesSample<T>) -> Result<T>;
}

impl<T: Scalar, M: PredictiveModel<T> + ?Sized> PredictiveModel<T> for &M {
    fn predict(&self, sample: &SeriesSample<T>) -> Result<T> {
        (**self).predict(sample)
    }
}

impl<T: Scalar, M: PredictiveModel<T> + ?Sized> PredictiveModel<T> for Box<M> {
    fn predict(&self, sample: &SeriesSample<T>) -> Result<T> {
        (**self).predict(sample)
    }
}

/// Any `Fn(&SeriesSample) -> T` is a model.
pub struct FnModel<F>(pub F);

impl<T: Scalar, F> PredictiveModel<T> for FnModel<F>
where
    F: Fn(&SeriesSample<T>) -> T + Send + Sync,
{
    fn predict(&self, sample: &SeriesSample<T>) -> Result<T> {
        Ok((self.0)(sample))
    }
}

/// Decides whether a candidate lies in-distribution.
pub trait PlausibilityCheck<T: Scalar>: Send + Sync {
    fn is_plausible(&self, sample: &SeriesSample<T>) -> Result<bool>;
}

impl<T: Scalar, P: PlausibilityCheck<T> + ?Sized> PlausibilityCheck<T> for &P {
    fn is_plausible(&self, sample: &SeriesSample<T>) -> Result<bool> {
        (**self).is_plausible(sample)
    }
}

/// Accepts (or rejects) every candidate.
#[derive(Clone, Copy, Debug)]
pub struct ConstantCheck(pub bool);

impl<T: Scalar> PlausibilityCheck<T> for ConstantCheck {
    fn is_plausible(&self, _: &SeriesSample<T>) -> Result<bool> {
        Ok(self.0)
    }
}
