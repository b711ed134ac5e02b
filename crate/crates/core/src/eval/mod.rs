//! Batch evaluation: run the search over many inputs and aggregate success,
//! validity, plausibility, proximity, and sparsity.

mod synth;
mod table;

pub use synth::{synth_dataset, SynthSpec};
pub use table::render_table;

use std::time::{Duration, Instant};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CfxError, Result};
use crate::models::{PlausibilityCheck, PredictiveModel};
use crate::sample::NamedSample;
use crate::scalar::Scalar;
use crate::search::{generate, Problem, SearchConfig, SearchReport};

/// 64-bit FNV-1a hash of a sample id.
pub fn stable_hash(id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed used for one sample of a batch; independent of evaluation order.
pub fn sample_seed(base_seed: u64, sample_id: &str) -> u64 {
    base_seed.wrapping_add(stable_hash(sample_id))
}

/// Counts and rates over one batch. Rates are percentages and are `None`
/// when their denominator is zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub n_samples: usize,
    pub n_invalid: usize,
    pub n_inv_val: usize,
    pub n_cfe: usize,
    pub n_val: usize,
    pub n_plau_val: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validity_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plausibility_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_proximity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_sparsity: Option<f64>,
}

fn percent(numerator: usize, denominator: usize) -> Option<f64> {
    (denominator > 0).then(|| 100.0 * numerator as f64 / denominator as f64)
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Result of one input of a batch. Equality ignores `elapsed`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SampleResult<T> {
    pub id: String,
    pub seed: u64,
    /// The model's prediction on the input missed the target.
    pub invalid: bool,
    /// Absent for inputs that already met the target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<SearchReport<T>>,
    /// The chosen counterfactual re-checked against the model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plausible: Option<bool>,
    #[serde(skip)]
    pub elapsed: Duration,
}

/// Equality ignores `elapsed`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BatchEvaluation<T> {
    pub summary: MetricsSummary,
    pub samples: Vec<SampleResult<T>>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl<T: PartialEq> PartialEq for SampleResult<T> {
    fn eq(&self, other: &Self) -> bool {
        (
            &self.id,
            self.seed,
            self.invalid,
            &self.report,
            self.valid,
            self.plausible,
        ) == (
            &other.id,
            other.seed,
            other.invalid,
            &other.report,
            other.valid,
            other.plausible,
        )
    }
}

impl<T: PartialEq> PartialEq for BatchEvaluation<T> {
    fn eq(&self, other: &Self) -> bool {
        self.summary == other.summary && self.samples == other.samples
    }
}

impl<T: Scalar> BatchEvaluation<T> {
    /// Aggregates per-sample results in order.
    pub fn from_results(samples: Vec<SampleResult<T>>, elapsed: Duration) -> Self {
        let mut s = MetricsSummary {
            n_samples: samples.len(),
            ..MetricsSummary::default()
        };
        let mut proximities = Vec::new();
        let mut sparsities = Vec::new();
        for r in &samples {
            if !r.invalid {
                continue;
            }
            s.n_invalid += 1;
            let Some(report) = r.report.as_ref().filter(|rep| rep.succeeded) else {
                continue;
            };
            s.n_inv_val += 1;
            s.n_cfe += 1;
            if r.valid != Some(true) {
                continue;
            }
            s.n_val += 1;
            if r.plausible == Some(true) {
                s.n_plau_val += 1;
            }
            if let (Some(p), Some(sp)) = (report.best_proximity, report.best_sparsity) {
                proximities.push(p.as_f64());
                sparsities.push(sp as f64);
            }
        }
        let judged = samples.iter().any(|r| r.plausible.is_some());
        s.success_rate = percent(s.n_inv_val, s.n_invalid);
        s.validity_rate = percent(s.n_val, s.n_cfe);
        s.plausibility_rate = if judged {
            percent(s.n_plau_val, s.n_val)
        } else {
            None
        };
        s.mean_proximity = mean(&proximities);
        s.mean_sparsity = mean(&sparsities);
        Self {
            summary: s,
            samples,
            elapsed,
        }
    }
}

fn evaluate_one<T: Scalar>(
    model: &dyn PredictiveModel<T>,
    named: &NamedSample<T>,
    problem: &Problem<T>,
    config: &SearchConfig<T>,
    detector: Option<&dyn PlausibilityCheck<T>>,
) -> Result<SampleResult<T>> {
    let started = Instant::now();
    let seed = sample_seed(config.seed, &named.id);
    let mut result = SampleResult {
        id: named.id.clone(),
        seed,
        invalid: false,
        report: None,
        valid: None,
        plausible: None,
        elapsed: Duration::ZERO,
    };
    let prediction = model.predict(&named.sample)?;
    if !problem.target.is_satisfied(prediction) {
        result.invalid = true;
        let config = config.clone().with_seed(seed);
        let report = generate(model, problem, &named.sample, &config, detector)?;
        if let Some(best) = &report.best {
            result.valid = Some(problem.target.is_satisfied(model.predict(best)?));
            if let Some(d) = detector {
                result.plausible = Some(d.is_plausible(best)?);
            }
        }
        result.report = Some(report);
    }
    result.elapsed = started.elapsed();
    Ok(result)
}

/// Searches a counterfactual for every input the model gets wrong and
/// aggregates the metrics. Inputs run in parallel on the current rayon
/// pool; each uses the seed [`sample_seed`] derives from its id.
///
/// The detector, when given, scores the chosen counterfactuals. It also
/// gates the search when `config.enforce_plausibility` is set.
pub fn evaluate_batch<T: Scalar>(
    model: &dyn PredictiveModel<T>,
    samples: &[NamedSample<T>],
    problem: &Problem<T>,
    config: &SearchConfig<T>,
    detector: Option<&dyn PlausibilityCheck<T>>,
) -> Result<BatchEvaluation<T>> {
    if samples.is_empty() {
        return Err(CfxError::Config(
            "evaluation needs at least one sample".into(),
        ));
    }
    config.validate()?;
    let started = Instant::now();
    let results = samples
        .par_iter()
        .map(|s| evaluate_one(model, s, problem, config, detector))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let batch = BatchEvaluation::from_results(results, started.elapsed());
    info!(
        "evaluated {} samples ({} invalid) in {:.2?}",
        batch.summary.n_samples, batch.summary.n_invalid, batch.elapsed
    );
    Ok(batch)
}

/// The same batch with the plausibility gate off and on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PlausibilityComparison<T> {
    pub ungated: BatchEvaluation<T>,
    pub gated: BatchEvaluation<T>,
    /// Gated minus ungated, in percentage points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plausibility_delta: Option<f64>,
}

fn delta(gated: Option<f64>, ungated: Option<f64>) -> Option<f64> {
    Some(gated? - ungated?)
}

pub fn compare_plausibility_modes<T: Scalar>(
    model: &dyn PredictiveModel<T>,
    samples: &[NamedSample<T>],
    problem: &Problem<T>,
    config: &SearchConfig<T>,
    detector: &dyn PlausibilityCheck<T>,
) -> Result<PlausibilityComparison<T>> {
    let ungated = evaluate_batch(
        model,
        samples,
        problem,
        &config.clone().with_plausibility(false),
        Some(detector),
    )?;
    let gated = evaluate_batch(
        model,
        samples,
        problem,
        &config.clone().with_plausibility(true),
        Some(detector),
    )?;
    Ok(PlausibilityComparison {
        success_delta: delta(gated.summary.success_rate, ungated.summary.success_rate),
        plausibility_delta: delta(
            gated.summary.plausibility_rate,
            ungated.summary.plausibility_rate,
        ),
        ungated,
        gated,
    })
}
