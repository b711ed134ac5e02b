use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{CfxError, Result};
use crate::sample::SeriesSample;
use crate::scalar::Scalar;

use super::PredictiveModel;

/// Majority vote over the nearest references in flattened Euclidean distance.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KnnModel<T> {
    references: Vec<(SeriesSample<T>, i64)>,
    n_neighbors: usize,
}

impl<T: Scalar> KnnModel<T> {
    pub fn new(references: Vec<(SeriesSample<T>, i64)>, n_neighbors: usize) -> Result<Self> {
        let Some((first, _)) = references.first() else {
            return Err(CfxError::Config(
                "KNN model needs at least one reference".into(),
            ));
        };
        if n_neighbors == 0 || n_neighbors > references.len() {
            return Err(CfxError::Config(format!(
                "n_neighbors = {n_neighbors} must be in 1..={}",
                references.len()
            )));
        }
        let shape = first.shape();
        if let Some(i) = references.iter().position(|(s, _)| s.shape() != shape) {
            return Err(CfxError::dim(format!(
                "reference {i} does not match shape {shape:?}"
            )));
        }
        Ok(Self {
            references,
            n_neighbors,
        })
    }

    /// `n_neighbors = floor(sqrt(N))`, at least one.
    pub fn with_sqrt_rule(references: Vec<(SeriesSample<T>, i64)>) -> Result<Self> {
        let n = ((references.len() as f64).sqrt().floor() as usize).max(1);
        Self::new(references, n)
    }

    pub fn n_neighbors(&self) -> usize {
        self.n_neighbors
    }

    /// Ties in the vote go to the smallest label.
    pub fn predict_label(&self, sample: &SeriesSample<T>) -> Result<i64> {
        let mut distances = self
            .references
            .iter()
            .map(|(r, label)| Ok((r.squared_distance(sample)?, *label)))
            .collect::<Result<Vec<_>>>()?;
        distances.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let mut votes = BTreeMap::new();
        for &(_, label) in &distances[..self.n_neighbors] {
            *votes.entry(label).or_insert(0usize) += 1;
        }
        let best = votes.values().copied().max().unwrap_or(0);
        Ok(votes
            .into_iter()
            .find(|&(_, v)| v == best)
            .map(|(label, _)| label)
            .expect("at least one vote"))
    }
}

impl<T: Scalar> PredictiveModel<T> for KnnModel<T> {
    fn predict(&self, sample: &SeriesSample<T>) -> Result<T> {
        self.predict_label(sample)
            .map(|l| T::from_i64(l).expect("label fits scalar"))
    }
}
