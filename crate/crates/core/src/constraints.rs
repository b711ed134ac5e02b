//! Range, causal, and immutability constraints applied after each transition.

use serde::{Deserialize, Serialize};

use crate::error::{CfxError, Result};
use crate::sample::SeriesSample;
use crate::scalar::Scalar;
use crate::schema::{is_category_code, FeatureKind, FeatureSchema};

/// Clamp `feature` into `[lower, upper]` at every step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct RangeRule<T> {
    pub feature: usize,
    pub lower: T,
    pub upper: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum CausalEffect<T> {
    /// `x[k][affected] = value`
    Set { value: T },
    /// `x[k][affected] = alpha * x[k][trigger] + offset`
    Linear { alpha: T, offset: T },
}

/// When `trigger` first differs from the original at step `k`, rewrite
/// `affected` at every step `>= k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct CausalRule<T> {
    pub trigger: usize,
    pub affected: usize,
    pub effect: CausalEffect<T>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct ConstraintSet<T> {
    #[serde(default)]
    pub range_rules: Vec<RangeRule<T>>,
    #[serde(default)]
    pub causal_rules: Vec<CausalRule<T>>,
}

impl<T: Scalar> ConstraintSet<T> {
    pub fn none() -> Self {
        Self {
            range_rules: Vec::new(),
            causal_rules: Vec::new(),
        }
    }

    pub fn with_range(mut self, feature: usize, lower: T, upper: T) -> Self {
        self.range_rules.push(RangeRule {
            feature,
            lower,
            upper,
        });
        self
    }

    pub fn with_causal(mut self, trigger: usize, affected: usize, effect: CausalEffect<T>) -> Self {
        self.causal_rules.push(CausalRule {
            trigger,
            affected,
            effect,
        });
        self
    }

    /// Checks indices against the schema and that causal rules are listed in
    /// dependency order: no rule rewrites a feature an earlier rule reads.
    pub fn validate(&self, schema: &FeatureSchema<T>) -> Result<()> {
        let d = schema.len();
        for r in &self.range_rules {
            if r.feature >= d {
                return Err(CfxError::Config(format!(
                    "range rule on feature {} but schema has {d} features",
                    r.feature
                )));
            }
            if !(r.lower <= r.upper) {
                return Err(CfxError::Config(format!(
                    "range rule on feature {} is empty: [{}, {}]",
                    r.feature, r.lower, r.upper
                )));
            }
        }
        for (i, rule) in self.causal_rules.iter().enumerate() {
            if rule.trigger >= d || rule.affected >= d {
                return Err(CfxError::Config(format!(
                    "causal rule {i} references a feature outside 0..{d}"
                )));
            }
            if rule.trigger == rule.affected {
                return Err(CfxError::Config(format!(
                    "causal rule {i} has feature {} as both trigger and affected",
                    rule.trigger
                )));
            }
            if let Some(earlier) = self.causal_rules[..i]
                .iter()
                .position(|e| e.trigger == rule.affected)
            {
                return Err(CfxError::Config(format!(
                    "causal rule {i} rewrites feature {} which rule {earlier} reads; list rules in dependency order",
                    rule.affected
                )));
            }
            if let FeatureKind::Discrete { cardinality } = schema.feature(rule.affected).kind {
                match rule.effect {
                    CausalEffect::Set { value } if is_category_code(value, cardinality) => {}
                    _ => {
                        return Err(CfxError::Config(format!(
                            "causal rule {i} must set discrete feature {} to a category code",
                            rule.affected
                        )))
                    }
                }
            }
        }
        Ok(())
    }
}

fn first_change<T: Scalar>(
    candidate: &SeriesSample<T>,
    original: &SeriesSample<T>,
    feature: usize,
) -> Option<usize> {
    (0..candidate.steps()).find(|&k| candidate.get(k, feature) != original.get(k, feature))
}

fn constraint_pass<T: Scalar>(
    state: &mut SeriesSample<T>,
    original: &SeriesSample<T>,
    constraints: &ConstraintSet<T>,
    schema: &FeatureSchema<T>,
) {
    let steps = state.steps();
    for rule in &constraints.causal_rules {
        let Some(from) = first_change(state, original, rule.trigger) else {
            continue;
        };
        for k in from..steps {
            let value = match rule.effect {
                CausalEffect::Set { value } => value,
                CausalEffect::Linear { alpha, offset } => {
                    alpha * state.get(k, rule.trigger) + offset
                }
            };
            state.set(k, rule.affected, value);
        }
    }

    let schema_ranges = schema
        .features()
        .iter()
        .enumerate()
        .filter_map(|(d, f)| f.range.map(|[lo, hi]| (d, lo, hi)));
    let rule_ranges = constraints
        .range_rules
        .iter()
        .map(|r| (r.feature, r.lower, r.upper));
    for (d, lo, hi) in schema_ranges.chain(rule_ranges) {
        for k in 0..steps {
            let v = state.get(k, d);
            state.set(k, d, v.max(lo).min(hi));
        }
    }

    for d in schema.immutable() {
        for k in 0..steps {
            state.set(k, d, original.get(k, d));
        }
    }
}

/// Applies causal rules, then range clamps, then resets immutable features to
/// the original's values.
///
/// A linear rule reads its trigger before that trigger is clamped, so the
/// pass is repeated until the state stops changing. Dependency-ordered rules
/// settle within `rules + 2` passes; the result is idempotent.
pub fn apply_constraints<T: Scalar>(
    candidate: &SeriesSample<T>,
    original: &SeriesSample<T>,
    constraints: &ConstraintSet<T>,
    schema: &FeatureSchema<T>,
) -> SeriesSample<T> {
    let mut state = candidate.clone();
    let max_passes = constraints.causal_rules.len() + 2;
    for _ in 0..max_passes {
        let before = state.clone();
        constraint_pass(&mut state, original, constraints, schema);
        if state == before {
            break;
        }
    }
    state
}
