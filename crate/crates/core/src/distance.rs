//! Feasibility-weighted proximity and cell-level sparsity.

use crate::error::{CfxError, Result};
use crate::sample::SeriesSample;
use crate::scalar::Scalar;
use crate::schema::{FeatureKind, FeatureSchema};

/// Absolute tolerance below which a continuous cell counts as unchanged.
pub const SPARSITY_TOLERANCE: f64 = 1e-9;

fn check_shapes<T: Scalar>(
    original: &SeriesSample<T>,
    candidate: &SeriesSample<T>,
    schema: &FeatureSchema<T>,
) -> Result<()> {
    original.ensure_same_shape(candidate)?;
    if original.features() != schema.len() {
        return Err(CfxError::dim(format!(
            "samples have {} features, schema has {}",
            original.features(),
            schema.len()
        )));
    }
    Ok(())
}

/// Unweighted change per feature: L1 for continuous columns, count of
/// differing cells for discrete ones.
pub fn feature_changes<T: Scalar>(
    original: &SeriesSample<T>,
    candidate: &SeriesSample<T>,
    schema: &FeatureSchema<T>,
) -> Result<Vec<T>> {
    check_shapes(original, candidate, schema)?;
    let mut changes = vec![T::zero(); schema.len()];
    for k in 0..original.steps() {
        let (a, b) = (original.row(k), candidate.row(k));
        for (d, change) in changes.iter_mut().enumerate() {
            *change += match schema.feature(d).kind {
                FeatureKind::Continuous => (a[d] - b[d]).abs(),
                FeatureKind::Discrete { .. } if a[d] != b[d] => T::one(),
                FeatureKind::Discrete { .. } => T::zero(),
            };
        }
    }
    Ok(changes)
}

/// Per-feature contribution `β_d * change_d` to the proximity.
pub fn proximity_by_feature<T: Scalar>(
    original: &SeriesSample<T>,
    candidate: &SeriesSample<T>,
    schema: &FeatureSchema<T>,
) -> Result<Vec<T>> {
    let mut changes = feature_changes(original, candidate, schema)?;
    for (d, c) in changes.iter_mut().enumerate() {
        *c *= schema.weight(d);
    }
    Ok(changes)
}

/// Weighted L1 (continuous) plus weighted L0 (discrete) distance.
pub fn proximity<T: Scalar>(
    original: &SeriesSample<T>,
    candidate: &SeriesSample<T>,
    schema: &FeatureSchema<T>,
) -> Result<T> {
    Ok(proximity_by_feature(original, candidate, schema)?
        .into_iter()
        .sum())
}

/// Number of cells whose absolute change exceeds `tolerance`.
///
/// Discrete codes differ by at least one, so any tolerance below one counts
/// every changed category.
pub fn sparsity<T: Scalar>(
    original: &SeriesSample<T>,
    candidate: &SeriesSample<T>,
    tolerance: T,
) -> Result<usize> {
    original.ensure_same_shape(candidate)?;
    Ok(original
        .as_slice()
        .iter()
        .zip(candidate.as_slice())
        .filter(|(&a, &b)| a != b && (a - b).abs() > tolerance)
        .count())
}
