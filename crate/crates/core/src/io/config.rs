//! TOML run configuration and the models and detectors it describes.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::error::{CfxError, Result};
use crate::models::{build_rule_model, KnnModel, LofDetector, PredictiveModel, ThresholdRuleModel};
use crate::models::{DEFAULT_LOF_NEIGHBORS, DEFAULT_LOF_THRESHOLD};
use crate::scalar::Scalar;
use crate::schema::FeatureSchema;
use crate::search::{Problem, SearchConfig};
use crate::target::TargetSpec;

use super::bridge::{DiscreteEncoding, ExternalModel, DEFAULT_TIMEOUT_MS};
use super::dataset::read_samples;

/// Where the model under explanation comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// A catalog rule (`dataset` + `variant`) or a rule definition file.
    Rule {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dataset: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        variant: Option<u8>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        definition: Option<PathBuf>,
    },
    /// Nearest neighbours over a labelled dataset sharing the run's schema.
    Knn {
        references: PathBuf,
        /// Defaults to `floor(sqrt(N))`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        neighbors: Option<usize>,
    },
    ExternalCommand {
        command: Vec<String>,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default)]
        encoding: DiscreteEncoding,
    },
}

fn default_timeout_ms() -> u64 {
    DEFAULT_TIMEOUT_MS
}

/// LOF detector fitted on a labelled reference dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct PlausibilitySpec<T> {
    pub references: PathBuf,
    #[serde(default = "default_lof_neighbors")]
    pub neighbors: usize,
    #[serde(default = "default_lof_threshold")]
    pub threshold: T,
    /// Keep only references with this label. Defaults to the target class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<i64>,
}

fn default_lof_neighbors() -> usize {
    DEFAULT_LOF_NEIGHBORS
}

fn default_lof_threshold<T: Scalar>() -> T {
    T::lit(DEFAULT_LOF_THRESHOLD)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    /// Schema document; defaults to `<input stem>.schema.json` next to the
    /// input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
}

/// A complete run description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct RunConfig<T> {
    #[serde(default)]
    pub search: SearchConfig<T>,
    pub target: TargetSpec<T>,
    pub model: ModelSpec,
    #[serde(default)]
    pub data: DataSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plausibility: Option<PlausibilitySpec<T>>,
    #[serde(default)]
    pub constraints: ConstraintSet<T>,
    #[serde(default)]
    pub output: OutputSpec,
    /// Worker threads for batch evaluation; all cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

fn rebase(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

impl<T: Scalar> RunConfig<T> {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| CfxError::Config(e.to_string()))?;
        config.search.validate()?;
        config.target.validate()?;
        if config.workers == Some(0) {
            return Err(CfxError::Config("workers must be at least 1".into()));
        }
        Ok(config)
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CfxError::io(path, e))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.rebase(base);
        Ok(config)
    }

    pub fn rebase(&mut self, base: &Path) {
        match &mut self.model {
            ModelSpec::Rule {
                definition: Some(p),
                ..
            } => rebase(base, p),
            ModelSpec::Knn { references, .. } => rebase(base, references),
            _ => {}
        }
        if let Some(p) = &mut self.plausibility {
            rebase(base, &mut p.references);
        }
        for p in [
            &mut self.data.schema,
            &mut self.output.report,
            &mut self.output.table,
        ]
        .into_iter()
        .flatten()
        {
            rebase(base, p);
        }
    }

    pub fn problem(&self, schema: FeatureSchema<T>) -> Result<Problem<T>> {
        Problem::new(schema, self.constraints.clone(), self.target)
    }
}

/// Schema path used for `input` when the config names none.
pub fn default_schema_path(input: &Path) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    input.with_file_name(format!("{stem}.schema.json"))
}

pub fn load_rule_definition<T: Scalar>(path: &Path) -> Result<ThresholdRuleModel<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| CfxError::io(path, e))?;
    let rule: ThresholdRuleModel<T> = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| CfxError::Config(format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text)
            .map_err(|e| CfxError::Config(format!("{}: {e}", path.display())))?
    };
    ThresholdRuleModel::new(
        rule.expr,
        rule.window_start,
        rule.target_label,
        rule.fallback_label,
    )
}

fn load_labelled<T: Scalar>(
    path: &Path,
    schema: &FeatureSchema<T>,
) -> Result<Vec<(crate::SeriesSample<T>, i64)>> {
    let file = std::fs::File::open(path).map_err(|e| CfxError::io(path, e))?;
    read_samples(file, schema, None)?
        .into_iter()
        .map(|s| {
            let label = s.label.ok_or_else(|| {
                CfxError::Config(format!(
                    "reference `{}` in {} has no label",
                    s.id,
                    path.display()
                ))
            })?;
            Ok((s.sample, label))
        })
        .collect()
}

/// Instantiates the configured model for inputs of shape `steps x schema.len()`.
pub fn build_model<T: Scalar>(
    spec: &ModelSpec,
    schema: &FeatureSchema<T>,
    steps: usize,
) -> Result<Box<dyn PredictiveModel<T>>> {
    Ok(match spec {
        ModelSpec::Rule {
            dataset: Some(id),
            variant: Some(v),
            definition: None,
        } => Box::new(build_rule_model::<T>(id, *v, steps, schema.len())?),
        ModelSpec::Rule {
            dataset: None,
            variant: None,
            definition: Some(path),
        } => Box::new(load_rule_definition::<T>(path)?),
        ModelSpec::Rule { .. } => {
            return Err(CfxError::Config(
                "rule model needs either `dataset` and `variant` or `definition`".into(),
            ))
        }
        ModelSpec::Knn {
            references,
            neighbors,
        } => {
            let refs = load_labelled(references, schema)?;
            match neighbors {
                Some(k) => Box::new(KnnModel::new(refs, *k)?),
                None => Box::new(KnnModel::with_sqrt_rule(refs)?),
            }
        }
        ModelSpec::ExternalCommand {
            command,
            timeout_ms,
            encoding,
        } => Box::new(ExternalModel::spawn(
            command.clone(),
            schema.clone(),
            Duration::from_millis(*timeout_ms),
            *encoding,
        )?),
    })
}

/// Fits the configured LOF detector on in-class references.
pub fn build_detector<T: Scalar>(
    spec: &PlausibilitySpec<T>,
    schema: &FeatureSchema<T>,
    target: &TargetSpec<T>,
) -> Result<LofDetector<T>> {
    let class = spec.class.or(match target {
        TargetSpec::Classification { class } => Some(*class),
        TargetSpec::Regression { .. } => None,
    });
    let refs: Vec<_> = load_labelled(&spec.references, schema)?
        .into_iter()
        .filter(|(_, label)| class.is_none_or(|c| c == *label))
        .map(|(s, _)| s)
        .collect();
    LofDetector::fitted(refs, spec.neighbors, spec.threshold)
}
