use serde::{Deserialize, Serialize};

use crate::error::{CfxError, Result};
use crate::sample::SeriesSample;
use crate::scalar::Scalar;

use super::PredictiveModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">")]
    Greater,
    #[serde(rename = "<")]
    Less,
    #[serde(rename = "=")]
    Equal,
}

/// `x[k][feature] <comparator> threshold`
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct Condition<T> {
    pub feature: usize,
    pub comparator: Comparator,
    pub threshold: T,
}

impl<T: Scalar> Condition<T> {
    pub fn new(feature: usize, comparator: Comparator, threshold: T) -> Self {
        Self {
            feature,
            comparator,
            threshold,
        }
    }

    fn holds(&self, row: &[T]) -> bool {
        let v = row[self.feature];
        match self.comparator {
            Comparator::Greater => v > self.threshold,
            Comparator::Less => v < self.threshold,
            Comparator::Equal => v == self.threshold,
        }
    }
}

/// Clause tree evaluated against a single time step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "T: Scalar")]
pub enum RuleExpr<T> {
    Cond(Condition<T>),
    All(Vec<RuleExpr<T>>),
    Any(Vec<RuleExpr<T>>),
}

impl<T: Scalar> RuleExpr<T> {
    pub fn gt(feature: usize, threshold: T) -> Self {
        RuleExpr::Cond(Condition::new(feature, Comparator::Greater, threshold))
    }

    pub fn lt(feature: usize, threshold: T) -> Self {
        RuleExpr::Cond(Condition::new(feature, Comparator::Less, threshold))
    }

    pub fn eq(feature: usize, threshold: T) -> Self {
        RuleExpr::Cond(Condition::new(feature, Comparator::Equal, threshold))
    }

    fn holds(&self, row: &[T]) -> bool {
        match self {
            RuleExpr::Cond(c) => c.holds(row),
            RuleExpr::All(children) => children.iter().all(|c| c.holds(row)),
            RuleExpr::Any(children) => children.iter().any(|c| c.holds(row)),
        }
    }

    /// Features referenced anywhere in the tree.
    pub fn features(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_features(&mut out);
        out
    }

    fn collect_features(&self, out: &mut Vec<usize>) {
        match self {
            RuleExpr::Cond(c) => {
                if !out.contains(&c.feature) {
                    out.push(c.feature);
                }
            }
            RuleExpr::All(children) | RuleExpr::Any(children) => {
                children.iter().for_each(|c| c.collect_features(out))
            }
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            RuleExpr::Cond(_) => false,
            RuleExpr::All(children) | RuleExpr::Any(children) => {
                children.is_empty() || children.iter().any(RuleExpr::is_empty)
            }
        }
    }
}

/// Predicts `target_label` when `expr` holds at every step from
/// `window_start` to the last step, `fallback_label` otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct ThresholdRuleModel<T> {
    pub expr: RuleExpr<T>,
    pub window_start: usize,
    pub target_label: i64,
    pub fallback_label: i64,
}

impl<T: Scalar> ThresholdRuleModel<T> {
    pub fn new(
        expr: RuleExpr<T>,
        window_start: usize,
        target_label: i64,
        fallback_label: i64,
    ) -> Result<Self> {
        if expr.is_empty() {
            return Err(CfxError::Config(
                "rule model has an empty clause list".into(),
            ));
        }
        Ok(Self {
            expr,
            window_start,
            target_label,
            fallback_label,
        })
    }

    /// Conditions over the last `window` steps of a `steps`-long series.
    pub fn over_last(expr: RuleExpr<T>, steps: usize, window: usize) -> Result<Self> {
        if window == 0 || window > steps {
            return Err(CfxError::Config(format!(
                "window of {window} steps does not fit a {steps}-step series"
            )));
        }
        Self::new(expr, steps - window, 1, 0)
    }

    pub fn with_labels(mut self, target_label: i64, fallback_label: i64) -> Self {
        self.target_label = target_label;
        self.fallback_label = fallback_label;
        self
    }

    pub fn check_sample(&self, sample: &SeriesSample<T>) -> Result<()> {
        if sample.steps() <= self.window_start {
            return Err(CfxError::dim(format!(
                "rule window starts at step {} but the sample has {} steps",
                self.window_start,
                sample.steps()
            )));
        }
        if let Some(&d) = self
            .expr
            .features()
            .iter()
            .find(|&&d| d >= sample.features())
        {
            return Err(CfxError::Schema(format!(
                "rule references feature {d} but the sample has {} features",
                sample.features()
            )));
        }
        Ok(())
    }

    pub fn predict_label(&self, sample: &SeriesSample<T>) -> Result<i64> {
        self.check_sample(sample)?;
        let holds = (self.window_start..sample.steps()).all(|k| self.expr.holds(sample.row(k)));
        Ok(if holds {
            self.target_label
        } else {
            self.fallback_label
        })
    }
}

impl<T: Scalar> PredictiveModel<T> for ThresholdRuleModel<T> {
    fn predict(&self, sample: &SeriesSample<T>) -> Result<T> {
        self.predict_label(sample)
            .map(|l| T::from_i64(l).expect("label fits scalar"))
    }
}
