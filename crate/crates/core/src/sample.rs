use serde::{Deserialize, Serialize};

use crate::error::{CfxError, Result};
use crate::scalar::Scalar;

/// A `K x D` multivariate series stored row-major: row `k` is time step `k`.
///
/// Static inputs are the `K = 1` case. Discrete cells hold integer category
/// codes stored as reals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", try_from = "SampleRepr<T>")]
pub struct SeriesSample<T> {
    steps: usize,
    features: usize,
    values: Vec<T>,
}

#[derive(Deserialize)]
#[serde(bound = "T: Scalar")]
struct SampleRepr<T> {
    steps: usize,
    features: usize,
    values: Vec<T>,
}

impl<T: Scalar> TryFrom<SampleRepr<T>> for SeriesSample<T> {
    type Error = CfxError;

    fn try_from(repr: SampleRepr<T>) -> Result<Self> {
        Self::new(repr.steps, repr.features, repr.values)
    }
}

impl<T: Scalar> SeriesSample<T> {
    pub fn new(steps: usize, features: usize, values: Vec<T>) -> Result<Self> {
        if steps == 0 || features == 0 {
            return Err(CfxError::dim(format!(
                "sample must have at least one step and one feature, got {steps}x{features}"
            )));
        }
        if values.len() != steps * features {
            return Err(CfxError::dim(format!(
                "expected {} values for a {steps}x{features} sample, got {}",
                steps * features,
                values.len()
            )));
        }
        Ok(Self {
            steps,
            features,
            values,
        })
    }

    pub fn zeros(steps: usize, features: usize) -> Result<Self> {
        Self::filled(steps, features, T::zero())
    }

    pub fn filled(steps: usize, features: usize, value: T) -> Result<Self> {
        Self::new(steps, features, vec![value; steps * features])
    }

    /// Builds a sample from one slice per time step.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let steps = rows.len();
        let features = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(steps * features);
        for (k, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != features {
                return Err(CfxError::dim(format!(
                    "row {k} has {} features, expected {features}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(steps, features, values)
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn features(&self) -> usize {
        self.features
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.steps, self.features)
    }

    #[inline]
    pub fn get(&self, step: usize, feature: usize) -> T {
        self.values[step * self.features + feature]
    }

    #[inline]
    pub fn set(&mut self, step: usize, feature: usize, value: T) {
        self.values[step * self.features + feature] = value;
    }

    #[inline]
    pub fn row(&self, step: usize) -> &[T] {
        &self.values[step * self.features..(step + 1) * self.features]
    }

    /// Row-major flattened view, the policy and KNN input layout.
    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn column(&self, feature: usize) -> impl Iterator<Item = T> + '_ {
        (0..self.steps).map(move |k| self.get(k, feature))
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(CfxError::dim(format!(
                "shape {}x{} does not match {}x{}",
                self.steps, self.features, other.steps, other.features
            )));
        }
        Ok(())
    }

    /// Squared Euclidean distance over flattened values.
    pub fn squared_distance(&self, other: &Self) -> Result<T> {
        self.ensure_same_shape(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum())
    }

    pub fn cast<U: Scalar>(&self) -> SeriesSample<U> {
        SeriesSample {
            steps: self.steps,
            features: self.features,
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// A sample with its dataset identifier and optional ground-truth label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NamedSample<T> {
    pub id: String,
    pub sample: SeriesSample<T>,
    pub label: Option<i64>,
}

impl<T: Scalar> NamedSample<T> {
    pub fn new(id: impl Into<String>, sample: SeriesSample<T>, label: Option<i64>) -> Self {
        Self {
            id: id.into(),
            sample,
            label,
        }
    }
}
