use serde::{Deserialize, Serialize};

use crate::error::{CfxError, Result};
use crate::scalar::Scalar;

/// The outcome a counterfactual must reach.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "mode",
    rename_all = "snake_case",
    bound = "T: Scalar",
    deny_unknown_fields
)]
pub enum TargetSpec<T> {
    /// The model must output exactly this label.
    Classification { class: i64 },
    /// The model output must fall inside `[lower, upper]`.
    Regression { lower: T, upper: T },
}

impl<T: Scalar> TargetSpec<T> {
    pub fn class(class: i64) -> Self {
        TargetSpec::Classification { class }
    }

    pub fn regression(lower: T, upper: T) -> Result<Self> {
        let target = TargetSpec::Regression { lower, upper };
        target.validate()?;
        Ok(target)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TargetSpec::Classification { .. } => Ok(()),
            TargetSpec::Regression { lower, upper } => {
                if lower <= upper {
                    Ok(())
                } else {
                    Err(CfxError::Config(format!(
                        "regression target bounds are reversed: [{lower}, {upper}]"
                    )))
                }
            }
        }
    }

    pub fn is_satisfied(&self, prediction: T) -> bool {
        match *self {
            TargetSpec::Classification { class } => {
                T::from_i64(class).is_some_and(|c| prediction == c)
            }
            TargetSpec::Regression { lower, upper } => lower <= prediction && prediction <= upper,
        }
    }
}
