use serde::{Deserialize, Serialize};

use crate::error::{CfxError, Result};
use crate::sample::SeriesSample;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    /// Integer-coded categories `0..cardinality`.
    Discrete {
        cardinality: usize,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutability {
    /// Directly changed by interventions.
    #[default]
    Actionable,
    /// Changed only through causal rules.
    NonActionable,
    /// Never changes.
    Immutable,
}

fn unit_weight<T: Scalar>() -> T {
    T::one()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FeatureSpec<T> {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
    #[serde(default)]
    pub mutability: Mutability,
    /// Cost multiplier for changing this feature.
    #[serde(default = "unit_weight")]
    pub feasibility_weight: T,
    /// Closed interval `[lo, hi]`, continuous features only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[T; 2]>,
}

impl<T: Scalar> FeatureSpec<T> {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Continuous,
            mutability: Mutability::Actionable,
            feasibility_weight: T::one(),
            range: None,
        }
    }

    pub fn discrete(name: impl Into<String>, cardinality: usize) -> Self {
        Self {
            kind: FeatureKind::Discrete { cardinality },
            ..Self::continuous(name)
        }
    }

    pub fn with_mutability(mut self, mutability: Mutability) -> Self {
        self.mutability = mutability;
        self
    }

    pub fn with_weight(mut self, weight: T) -> Self {
        self.feasibility_weight = weight;
        self
    }

    pub fn with_range(mut self, lo: T, hi: T) -> Self {
        self.range = Some([lo, hi]);
        self
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, FeatureKind::Discrete { .. })
    }

    pub fn cardinality(&self) -> Option<usize> {
        match self.kind {
            FeatureKind::Discrete { cardinality } => Some(cardinality),
            FeatureKind::Continuous => None,
        }
    }
}

/// Per-feature metadata for a `K x D` input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", try_from = "SchemaRepr<T>")]
pub struct FeatureSchema<T> {
    features: Vec<FeatureSpec<T>>,
}

#[derive(Deserialize)]
#[serde(bound = "T: Scalar")]
struct SchemaRepr<T> {
    features: Vec<FeatureSpec<T>>,
}

impl<T: Scalar> TryFrom<SchemaRepr<T>> for FeatureSchema<T> {
    type Error = CfxError;

    fn try_from(repr: SchemaRepr<T>) -> Result<Self> {
        Self::new(repr.features)
    }
}

impl<T: Scalar> FeatureSchema<T> {
    pub fn new(features: Vec<FeatureSpec<T>>) -> Result<Self> {
        if features.is_empty() {
            return Err(CfxError::Schema("schema has no features".into()));
        }
        for (d, f) in features.iter().enumerate() {
            if !(f.feasibility_weight > T::zero()) || !f.feasibility_weight.is_finite() {
                return Err(CfxError::Schema(format!(
                    "feature {d} (`{}`) has non-positive feasibility weight {}",
                    f.name, f.feasibility_weight
                )));
            }
            match f.kind {
                FeatureKind::Discrete { cardinality } => {
                    if cardinality == 0 {
                        return Err(CfxError::Schema(format!(
                            "discrete feature {d} (`{}`) has zero cardinality",
                            f.name
                        )));
                    }
                    if f.range.is_some() {
                        return Err(CfxError::Schema(format!(
                            "discrete feature {d} (`{}`) cannot carry a range",
                            f.name
                        )));
                    }
                }
                FeatureKind::Continuous => {
                    if let Some([lo, hi]) = f.range {
                        if !(lo <= hi) {
                            return Err(CfxError::Schema(format!(
                                "feature {d} (`{}`) has empty range [{lo}, {hi}]",
                                f.name
                            )));
                        }
                    }
                }
            }
        }
        if !features
            .iter()
            .any(|f| f.mutability == Mutability::Actionable)
        {
            return Err(CfxError::Schema("no actionable feature".into()));
        }
        Ok(Self { features })
    }

    /// `count` actionable continuous features named `f_0..`, unit weights.
    pub fn all_continuous(count: usize) -> Result<Self> {
        Self::new(
            (0..count)
                .map(|d| FeatureSpec::continuous(format!("f_{d}")))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature(&self, d: usize) -> &FeatureSpec<T> {
        &self.features[d]
    }

    pub fn features(&self) -> &[FeatureSpec<T>] {
        &self.features
    }

    pub fn weight(&self, d: usize) -> T {
        self.features[d].feasibility_weight
    }

    /// Replaces one feasibility weight, revalidating.
    pub fn with_weight(&self, d: usize, weight: T) -> Result<Self> {
        let mut features = self.features.clone();
        features
            .get_mut(d)
            .ok_or_else(|| CfxError::Schema(format!("feature {d} out of range")))?
            .feasibility_weight = weight;
        Self::new(features)
    }

    pub fn with_mutability(&self, d: usize, mutability: Mutability) -> Result<Self> {
        let mut features = self.features.clone();
        features
            .get_mut(d)
            .ok_or_else(|| CfxError::Schema(format!("feature {d} out of range")))?
            .mutability = mutability;
        Self::new(features)
    }

    /// Global indices of actionable features in ascending order.
    pub fn actionable(&self) -> Vec<usize> {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, f)| f.mutability == Mutability::Actionable)
            .map(|(d, _)| d)
            .collect()
    }

    pub fn immutable(&self) -> impl Iterator<Item = usize> + '_ {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, f)| f.mutability == Mutability::Immutable)
            .map(|(d, _)| d)
    }

    /// Checks the feature count and that discrete cells are valid codes.
    pub fn validate_sample(&self, sample: &SeriesSample<T>) -> Result<()> {
        if sample.features() != self.len() {
            return Err(CfxError::dim(format!(
                "sample has {} features, schema has {}",
                sample.features(),
                self.len()
            )));
        }
        for (d, f) in self.features.iter().enumerate() {
            if let FeatureKind::Discrete { cardinality } = f.kind {
                for (k, v) in sample.column(d).enumerate() {
                    if !is_category_code(v, cardinality) {
                        return Err(CfxError::Schema(format!(
                            "cell ({k}, {d}) = {v} is not a category code of `{}` (cardinality {cardinality})",
                            f.name
                        )));
                    }
                }
            } else if let Some((k, v)) = sample.column(d).enumerate().find(|(_, v)| !v.is_finite())
            {
                return Err(CfxError::Schema(format!(
                    "cell ({k}, {d}) of `{}` is not finite: {v}",
                    f.name
                )));
            }
        }
        Ok(())
    }

    /// Maps the policy's actionable-feature index onto heads and features.
    pub fn action_layout(&self, steps: usize) -> ActionLayout {
        let mut slots = Vec::new();
        let mut continuous = 0;
        let mut discrete_total = 0;
        for d in self.actionable() {
            let head = match self.features[d].kind {
                FeatureKind::Continuous => {
                    continuous += 1;
                    HeadSlot::Continuous {
                        index: continuous - 1,
                    }
                }
                FeatureKind::Discrete { cardinality } => {
                    discrete_total += cardinality;
                    HeadSlot::Discrete {
                        offset: discrete_total - cardinality,
                        cardinality,
                    }
                }
            };
            slots.push(ActionSlot { feature: d, head });
        }
        ActionLayout {
            steps,
            features: self.len(),
            slots,
            continuous,
            discrete_total,
        }
    }
}

pub(crate) fn is_category_code<T: Scalar>(v: T, cardinality: usize) -> bool {
    v.is_finite() && v.fract() == T::zero() && v >= T::zero() && v < T::from_count(cardinality)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeadSlot {
    /// Index into the mean/scale heads.
    Continuous { index: usize },
    /// Segment `offset..offset + cardinality` of the category head.
    Discrete { offset: usize, cardinality: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSlot {
    /// Global feature index.
    pub feature: usize,
    pub head: HeadSlot,
}

/// Shape of the factored action space derived from a schema.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionLayout {
    pub steps: usize,
    pub features: usize,
    pub slots: Vec<ActionSlot>,
    /// Actionable continuous features.
    pub continuous: usize,
    /// Summed cardinality over actionable discrete features.
    pub discrete_total: usize,
}

impl ActionLayout {
    pub fn actionable(&self) -> usize {
        self.slots.len()
    }

    pub fn input_width(&self) -> usize {
        self.steps * self.features
    }
}
