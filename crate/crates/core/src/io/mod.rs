//! Files and processes: datasets, run configuration, JSON reports and
//! checkpoints, and the external-model bridge.

mod bridge;
mod config;
mod dataset;

pub use bridge::{DiscreteEncoding, ExternalModel, DEFAULT_TIMEOUT_MS};
pub use config::{
    build_detector, build_model, default_schema_path, load_rule_definition, DataSpec, ModelSpec,
    OutputSpec, PlausibilitySpec, RunConfig,
};
pub use dataset::{
    load_dataset, load_schema, read_samples, save_dataset, save_schema, write_samples,
    AffineTransform, Dataset, SchemaDocument,
};

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CfxError, Result};

/// Pretty-printed JSON with a trailing newline. Parent directories are
/// created as needed.
pub fn save_json<V: Serialize + ?Sized>(path: impl AsRef<Path>, value: &V) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CfxError::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| CfxError::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CfxError::io(path, e.into()))?;
    out.write_all(b"\n")
        .and_then(|_| out.flush())
        .map_err(|e| CfxError::io(path, e))
}

pub fn load_json<V: DeserializeOwned>(path: impl AsRef<Path>) -> Result<V> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CfxError::io(path, e))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CfxError::Config(format!("{}: {e}", path.display())))
}
