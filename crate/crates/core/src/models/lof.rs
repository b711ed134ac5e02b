//! Local outlier factor over flattened samples.

use crate::error::{CfxError, Result};
use crate::sample::SeriesSample;
use crate::scalar::Scalar;

use super::PlausibilityCheck;

pub const DEFAULT_LOF_NEIGHBORS: usize = 20;
/// Scores at or below this mark an inlier.
pub const DEFAULT_LOF_THRESHOLD: f64 = 1.5;

// Keeps densities finite when a point has duplicate neighbours.
const DENSITY_EPS: f64 = 1e-10;

#[derive(Clone, Debug)]
struct Fitted<T> {
    shape: (usize, usize),
    references: Vec<SeriesSample<T>>,
    k_distance: Vec<T>,
    density: Vec<T>,
}

/// In-distribution detector scoring a query against a reference set.
///
/// Queries are treated as novel points: their neighbourhood is drawn from the
/// references only.
#[derive(Clone, Debug)]
pub struct LofDetector<T> {
    n_neighbors: usize,
    threshold: T,
    fitted: Option<Fitted<T>>,
}

fn distance<T: Scalar>(a: &SeriesSample<T>, b: &SeriesSample<T>) -> T {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

/// Indices and distances of the `k` nearest entries, ties broken by index.
fn nearest<T: Scalar>(distances: impl Iterator<Item = (usize, T)>, k: usize) -> Vec<(usize, T)> {
    let mut all: Vec<(usize, T)> = distances.collect();
    all.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    all.truncate(k);
    all
}

impl<T: Scalar> LofDetector<T> {
    /// An unfitted detector.
    pub fn new(n_neighbors: usize, threshold: T) -> Result<Self> {
        if n_neighbors == 0 {
            return Err(CfxError::Config("LOF needs at least one neighbour".into()));
        }
        Ok(Self {
            n_neighbors,
            threshold,
            fitted: None,
        })
    }

    pub fn fitted(
        references: Vec<SeriesSample<T>>,
        n_neighbors: usize,
        threshold: T,
    ) -> Result<Self> {
        let mut detector = Self::new(n_neighbors, threshold)?;
        detector.fit(references)?;
        Ok(detector)
    }

    pub fn n_neighbors(&self) -> usize {
        self.n_neighbors
    }

    pub fn threshold(&self) -> T {
        self.threshold
    }

    pub fn fit(&mut self, references: Vec<SeriesSample<T>>) -> Result<()> {
        let k = self.n_neighbors;
        if references.len() <= k {
            return Err(CfxError::Config(format!(
                "LOF with {k} neighbours needs more than {k} references, got {}",
                references.len()
            )));
        }
        let shape = references[0].shape();
        if let Some(i) = references.iter().position(|r| r.shape() != shape) {
            return Err(CfxError::dim(format!(
                "LOF reference {i} does not match shape {shape:?}"
            )));
        }
        let n = references.len();
        let mut pairwise = vec![T::zero(); n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = distance(&references[i], &references[j]);
                pairwise[i * n + j] = d;
                pairwise[j * n + i] = d;
            }
        }
        let neighbourhoods: Vec<Vec<(usize, T)>> = (0..n)
            .map(|i| {
                nearest(
                    (0..n).filter(|&j| j != i).map(|j| (j, pairwise[i * n + j])),
                    k,
                )
            })
            .collect();
        let k_distance: Vec<T> = neighbourhoods.iter().map(|nb| nb[k - 1].1).collect();
        let density = neighbourhoods
            .iter()
            .map(|nb| local_density(nb, &k_distance))
            .collect();
        self.fitted = Some(Fitted {
            shape,
            references,
            k_distance,
            density,
        });
        Ok(())
    }

    /// Local outlier factor of `sample`; about one inside a cluster.
    pub fn score(&self, sample: &SeriesSample<T>) -> Result<T> {
        let fitted = self
            .fitted
            .as_ref()
            .ok_or_else(|| CfxError::State("LOF detector has not been fitted".into()))?;
        if sample.shape() != fitted.shape {
            return Err(CfxError::dim(format!(
                "query shape {:?} does not match references {:?}",
                sample.shape(),
                fitted.shape
            )));
        }
        let nb = nearest(
            fitted
                .references
                .iter()
                .enumerate()
                .map(|(j, r)| (j, distance(sample, r))),
            self.n_neighbors,
        );
        let own = local_density(&nb, &fitted.k_distance);
        let mean_neighbour =
            nb.iter().map(|&(j, _)| fitted.density[j]).sum::<T>() / T::from_count(nb.len());
        Ok(mean_neighbour / own)
    }

    pub fn is_inlier(&self, sample: &SeriesSample<T>) -> Result<bool> {
        Ok(self.score(sample)? <= self.threshold)
    }
}

fn local_density<T: Scalar>(neighbourhood: &[(usize, T)], k_distance: &[T]) -> T {
    let reach = neighbourhood
        .iter()
        .map(|&(j, d)| d.max(k_distance[j]))
        .sum::<T>()
        / T::from_count(neighbourhood.len());
    T::one() / (reach + T::lit(DENSITY_EPS))
}

impl<T: Scalar> PlausibilityCheck<T> for LofDetector<T> {
    fn is_plausible(&self, sample: &SeriesSample<T>) -> Result<bool> {
        self.is_inlier(sample)
    }
}
