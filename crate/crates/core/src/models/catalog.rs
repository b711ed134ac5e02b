//! The two interpretable threshold rules defined for each benchmark dataset.
//!
//! Feature indices are 0-based. Windows cover the final `n` steps.

use crate::error::{CfxError, Result};
use crate::scalar::Scalar;

use super::rule::{RuleExpr, ThresholdRuleModel};

pub const DATASET_IDS: [&str; 9] = [
    "life_expectancy",
    "pems_sf",
    "natops",
    "heartbeat",
    "racket_sports",
    "basic_motions",
    "ering",
    "japanese_vowels",
    "libras",
];

/// Native `(K, D)` of each dataset.
pub fn dataset_shape(dataset_id: &str) -> Result<(usize, usize)> {
    Ok(match dataset_id {
        "life_expectancy" => (16, 14),
        "pems_sf" => (144, 963),
        "natops" => (51, 24),
        "heartbeat" => (405, 61),
        "racket_sports" => (30, 6),
        "basic_motions" => (100, 6),
        "ering" => (65, 4),
        "japanese_vowels" => (29, 12),
        "libras" => (45, 2),
        other => return Err(unknown(other)),
    })
}

fn unknown(id: &str) -> CfxError {
    CfxError::Config(format!(
        "unknown dataset id `{id}`; expected one of {}",
        DATASET_IDS.join(", ")
    ))
}

// Life Expectancy column order after dropping name and year.
const LE_LEAST_DEVELOPED: usize = 1;
const LE_HEALTH_EXPENDITURE: usize = 4;
const LE_GDP_PER_CAPITA: usize = 7;
const LE_OPEN_DEFECATION: usize = 10;
const LE_DRINKING_WATER: usize = 11;

// NATOPS channels come in (x, y, z) triples: hand tip left, hand tip right, ...
const NATOPS_HAND_TIP_LEFT_X: usize = 0;
const NATOPS_HAND_TIP_RIGHT_X: usize = 3;

fn positive_rule<T: Scalar>(
    features: &[usize],
    variant: u8,
    window: usize,
) -> (RuleExpr<T>, usize) {
    let clauses = features
        .iter()
        .map(|&d| RuleExpr::gt(d, T::zero()))
        .collect();
    let expr = if variant == 1 {
        RuleExpr::All(clauses)
    } else {
        RuleExpr::Any(clauses)
    };
    (expr, window)
}

/// Builds rule model `variant` (1 = conjunctive, 2 = disjunctive) for a
/// dataset with `steps` time steps and `features` features.
pub fn build_rule_model<T: Scalar>(
    dataset_id: &str,
    variant: u8,
    steps: usize,
    features: usize,
) -> Result<ThresholdRuleModel<T>> {
    if variant != 1 && variant != 2 {
        return Err(CfxError::Config(format!(
            "rule model variant must be 1 or 2, got {variant}"
        )));
    }
    let (expr, window) = match dataset_id {
        "life_expectancy" => {
            let income = [
                RuleExpr::gt(LE_GDP_PER_CAPITA, T::zero()),
                RuleExpr::gt(LE_HEALTH_EXPENDITURE, T::zero()),
            ];
            let mut clauses = vec![RuleExpr::eq(LE_LEAST_DEVELOPED, T::zero())];
            if variant == 1 {
                clauses.extend(income);
            } else {
                clauses.push(RuleExpr::Any(income.to_vec()));
            }
            clauses.push(RuleExpr::gt(LE_DRINKING_WATER, T::zero()));
            clauses.push(RuleExpr::lt(LE_OPEN_DEFECATION, T::zero()));
            (RuleExpr::All(clauses), 5)
        }
        "pems_sf" => positive_rule(&[0, 99, 299], variant, 51),
        "natops" => positive_rule(
            &[NATOPS_HAND_TIP_LEFT_X, NATOPS_HAND_TIP_RIGHT_X],
            variant,
            10,
        ),
        "heartbeat" => positive_rule(&[0, 1, 2], variant, 5),
        "racket_sports" => positive_rule(&[0, 4], variant, 5),
        "basic_motions" => positive_rule(&[0, 2, 5], variant, 10),
        "ering" => positive_rule(&[1, 2], variant, 10),
        "japanese_vowels" => positive_rule(&[0, 5, 11], variant, 20),
        "libras" => positive_rule(&[0, 1], variant, 20),
        other => return Err(unknown(other)),
    };
    if let Some(d) = expr.features().into_iter().find(|&d| d >= features) {
        return Err(CfxError::Schema(format!(
            "`{dataset_id}` rule uses feature {d} but only {features} features were given"
        )));
    }
    ThresholdRuleModel::over_last(expr, steps, window)
}
