//! Long-format CSV datasets and their JSON schema documents.
//!
//! One row per `(sample_id, t)` with columns `sample_id, t, f_0 .. f_{D-1}`
//! and an optional trailing `label`. Rows of a sample are contiguous and
//! `t` runs `0..K` in order.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CfxError, Result};
use crate::sample::{NamedSample, SeriesSample};
use crate::scalar::Scalar;
use crate::schema::{is_category_code, FeatureKind, FeatureSchema, FeatureSpec};

/// Per-feature `x' = (x - shift) / scale`, applied to continuous columns on
/// load.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct AffineTransform<T> {
    pub shift: T,
    pub scale: T,
}

/// Companion schema file of a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct SchemaDocument<T> {
    /// Expected series length; checked on load when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    pub features: Vec<FeatureSpec<T>>,
    /// One entry per feature; discrete entries are ignored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<Vec<AffineTransform<T>>>,
}

impl<T: Scalar> SchemaDocument<T> {
    pub fn new(schema: &FeatureSchema<T>, steps: Option<usize>) -> Self {
        Self {
            steps,
            features: schema.features().to_vec(),
            transform: None,
        }
    }

    pub fn schema(&self) -> Result<FeatureSchema<T>> {
        let schema = FeatureSchema::new(self.features.clone())?;
        if let Some(t) = &self.transform {
            if t.len() != schema.len() {
                return Err(CfxError::Schema(format!(
                    "transform has {} entries for {} features",
                    t.len(),
                    schema.len()
                )));
            }
            if let Some(d) = t
                .iter()
                .position(|a| !(a.scale != T::zero() && a.scale.is_finite() && a.shift.is_finite()))
            {
                return Err(CfxError::Schema(format!(
                    "transform of feature {d} is not invertible"
                )));
            }
        }
        Ok(schema)
    }
}

pub fn load_schema<T: Scalar>(path: impl AsRef<Path>) -> Result<SchemaDocument<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CfxError::io(path, e))?;
    let doc: SchemaDocument<T> = serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| CfxError::Schema(format!("{}: {e}", path.display())))?;
    doc.schema()?;
    Ok(doc)
}

pub fn save_schema<T: Scalar>(path: impl AsRef<Path>, doc: &SchemaDocument<T>) -> Result<()> {
    super::save_json(path, doc)
}

/// A dataset loaded against its schema.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub schema: FeatureSchema<T>,
    pub samples: Vec<NamedSample<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn find(&self, sample_id: &str) -> Option<&NamedSample<T>> {
        self.samples.iter().find(|s| s.id == sample_id)
    }

    /// Common series length, `None` when empty.
    pub fn steps(&self) -> Option<usize> {
        self.samples.first().map(|s| s.sample.steps())
    }
}

pub fn load_dataset<T: Scalar>(
    data_path: impl AsRef<Path>,
    schema_path: impl AsRef<Path>,
) -> Result<Dataset<T>> {
    let doc = load_schema::<T>(schema_path)?;
    let schema = doc.schema()?;
    let path = data_path.as_ref();
    let file = File::open(path).map_err(|e| CfxError::io(path, e))?;
    let mut samples = read_samples(file, &schema, doc.steps)?;
    if let Some(transform) = &doc.transform {
        for s in &mut samples {
            apply_transform(&mut s.sample, &schema, transform);
        }
    }
    Ok(Dataset { schema, samples })
}

fn apply_transform<T: Scalar>(
    sample: &mut SeriesSample<T>,
    schema: &FeatureSchema<T>,
    transform: &[AffineTransform<T>],
) {
    for (d, a) in transform.iter().enumerate() {
        if schema.feature(d).is_discrete() {
            continue;
        }
        for k in 0..sample.steps() {
            sample.set(k, d, (sample.get(k, d) - a.shift) / a.scale);
        }
    }
}

fn parse_error(line: usize, sample_id: &str, message: impl Into<String>) -> CfxError {
    CfxError::Parse {
        line,
        sample_id: sample_id.to_string(),
        message: message.into(),
    }
}

struct Pending<T> {
    id: String,
    first_line: usize,
    label: Option<i64>,
    values: Vec<T>,
    steps: usize,
}

/// Parses CSV rows against `schema`. An empty input yields no samples.
pub fn read_samples<T: Scalar, R: Read>(
    reader: R,
    schema: &FeatureSchema<T>,
    steps: Option<usize>,
) -> Result<Vec<NamedSample<T>>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let width = schema.len();
    let headers = csv
        .headers()
        .map_err(|e| parse_error(1, "", e.to_string()))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(Vec::new());
    }
    let has_label = match headers.len() {
        n if n == width + 2 => false,
        n if n == width + 3 && &headers[width + 2] == "label" => true,
        n => {
            return Err(parse_error(
                1,
                "",
                format!(
                "header has {n} columns; expected sample_id, t, {width} features, optional label"
            ),
            ))
        }
    };
    if &headers[0] != "sample_id" || &headers[1] != "t" {
        return Err(parse_error(1, "", "header must start with `sample_id,t`"));
    }

    let mut done: Vec<NamedSample<T>> = Vec::new();
    let mut pending: Option<Pending<T>> = None;
    let mut expected_steps = steps;
    let finish = |p: Pending<T>,
                  expected: &mut Option<usize>,
                  done: &mut Vec<NamedSample<T>>|
     -> Result<()> {
        match *expected {
            Some(k) if k != p.steps => {
                return Err(parse_error(
                    p.first_line,
                    &p.id,
                    format!("sample has {} time steps, expected {k}", p.steps),
                ))
            }
            _ => *expected = Some(p.steps),
        }
        let sample = SeriesSample::new(p.steps, width, p.values)?;
        done.push(NamedSample::new(p.id, sample, p.label));
        Ok(())
    };

    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(line, "", e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let id = &record[0];
        if id.is_empty() {
            return Err(parse_error(line, id, "empty sample_id"));
        }
        let t: usize = record[1].parse().map_err(|_| {
            parse_error(
                line,
                id,
                format!("time index `{}` is not a non-negative integer", &record[1]),
            )
        })?;
        let label = if has_label && !record[width + 2].is_empty() {
            Some(record[width + 2].parse::<i64>().map_err(|_| {
                parse_error(
                    line,
                    id,
                    format!("label `{}` is not an integer", &record[width + 2]),
                )
            })?)
        } else {
            None
        };

        if pending.as_ref().is_some_and(|p| p.id != id) {
            finish(pending.take().unwrap(), &mut expected_steps, &mut done)?;
        }
        if pending.is_none() {
            if done.iter().any(|s| s.id == id) {
                return Err(parse_error(
                    line,
                    id,
                    "rows of this sample are not contiguous",
                ));
            }
            pending = Some(Pending {
                id: id.to_string(),
                first_line: line,
                label,
                values: Vec::new(),
                steps: 0,
            });
        }
        let p = pending.as_mut().unwrap();
        if t != p.steps {
            return Err(parse_error(
                line,
                id,
                format!("expected t = {}, found {t}", p.steps),
            ));
        }
        if label != p.label {
            return Err(parse_error(
                line,
                id,
                "label differs between rows of one sample",
            ));
        }
        for d in 0..width {
            let raw = &record[d + 2];
            let v: f64 = raw.parse().map_err(|_| {
                parse_error(
                    line,
                    id,
                    format!("feature {d} value `{raw}` is not a number"),
                )
            })?;
            let v = T::lit(v);
            match schema.feature(d).kind {
                FeatureKind::Discrete { cardinality } if !is_category_code(v, cardinality) => {
                    return Err(parse_error(
                        line,
                        id,
                        format!("feature {d} value {raw} is not a category below {cardinality}"),
                    ));
                }
                FeatureKind::Continuous if !v.is_finite() => {
                    return Err(parse_error(
                        line,
                        id,
                        format!("feature {d} value {raw} is not finite"),
                    ));
                }
                _ => {}
            }
            p.values.push(v);
        }
        p.steps += 1;
    }
    if let Some(p) = pending {
        finish(p, &mut expected_steps, &mut done)?;
    }
    Ok(done)
}

/// Writes samples with 17 significant digits per cell, so `f64` values
/// survive a round trip bit for bit. A `label` column is written when any
/// sample has one.
pub fn write_samples<T: Scalar, W: Write>(writer: W, samples: &[NamedSample<T>]) -> Result<()> {
    let features = samples.first().map_or(0, |s| s.sample.features());
    let has_label = samples.iter().any(|s| s.label.is_some());
    let mut csv = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| CfxError::Io {
        path: "<csv>".into(),
        source: std::io::Error::other(e),
    };
    let mut header = vec!["sample_id".to_string(), "t".to_string()];
    header.extend((0..features).map(|d| format!("f_{d}")));
    if has_label {
        header.push("label".into());
    }
    csv.write_record(&header).map_err(to_err)?;
    for s in samples {
        if s.sample.features() != features {
            return Err(CfxError::dim(format!(
                "sample `{}` has {} features, expected {features}",
                s.id,
                s.sample.features()
            )));
        }
        for k in 0..s.sample.steps() {
            let mut row = vec![s.id.clone(), k.to_string()];
            row.extend(s.sample.row(k).iter().map(|v| format!("{v:.16e}")));
            if has_label {
                row.push(s.label.map(|l| l.to_string()).unwrap_or_default());
            }
            csv.write_record(&row).map_err(to_err)?;
        }
    }
    csv.flush().map_err(|e| CfxError::Io {
        path: "<csv>".into(),
        source: e,
    })
}

pub fn save_dataset<T: Scalar>(path: impl AsRef<Path>, samples: &[NamedSample<T>]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| CfxError::io(path, e))?;
    write_samples(std::io::BufWriter::new(file), samples).map_err(|e| match e {
        CfxError::Io { source, .. } => CfxError::io(path, source),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_continuous() -> FeatureSchema<f64> {
        FeatureSchema::all_continuous(1).unwrap()
    }

    #[test]
    fn empty_input_yields_no_samples() {
        assert!(read_samples(&b""[..], &one_continuous(), None)
            .unwrap()
            .is_empty());
        assert!(
            read_samples(&b"sample_id,t,f_0\n"[..], &one_continuous(), None)
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn two_step_fixture() {
        let text = "sample_id,t,f_0\ns0,0,1.5\ns0,1,-0.5\n";
        let got = read_samples(text.as_bytes(), &one_continuous(), None).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].id, "s0");
        assert_eq!(got[0].sample.as_slice(), &[1.5, -0.5]);
        assert_eq!(got[0].label, None);
    }

    #[test]
    fn category_out_of_range_names_sample_and_line() {
        let schema = FeatureSchema::new(vec![FeatureSpec::<f64>::discrete("c", 2)]).unwrap();
        let text = "sample_id,t,f_0\na,0,1\nb,0,5\n";
        match read_samples(text.as_bytes(), &schema, None) {
            Err(CfxError::Parse {
                line, sample_id, ..
            }) => {
                assert_eq!(line, 3);
                assert_eq!(sample_id, "b");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn structural_errors() {
        let s = one_continuous();
        let bad = [
            "sample_id,t,f_0\na,0,1\na,2,1\n",
            "sample_id,t,f_0\na,0,1\na,1,1\nb,0,1\n",
            "sample_id,t,f_0\na,0,1\nb,0,1\na,1,1\n",
            "sample_id,t,f_0\na,0,x\n",
            "sample_id,t,f_0,label\na,0,1,1\na,1,1,0\n",
            "sample_id,t,f_0,f_1\na,0,1,2\n",
            "sample_id,t,f_0\na,0,inf\n",
        ];
        for text in bad {
            assert!(
                matches!(
                    read_samples(text.as_bytes(), &s, None),
                    Err(CfxError::Parse { .. })
                ),
                "{text}"
            );
        }
        let text = "sample_id,t,f_0\na,0,1\na,1,1\n";
        assert!(read_samples(text.as_bytes(), &s, Some(3)).is_err());
    }

    #[test]
    fn labels_round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let samples = vec![
            NamedSample::new(
                "x",
                SeriesSample::from_rows(&[[0.1, 2.0], [1.0 / 3.0, 1.0]]).unwrap(),
                Some(1),
            ),
            NamedSample::new(
                "y",
                SeriesSample::from_rows(&[[-7e-300, 0.0], [f64::MAX, 1.0]]).unwrap(),
                None,
            ),
        ];
        let schema = FeatureSchema::new(vec![
            FeatureSpec::continuous("a"),
            FeatureSpec::discrete("b", 3),
        ])
        .unwrap();
        let data = dir.path().join("d.csv");
        let meta = dir.path().join("d.schema.json");
        save_dataset(&data, &samples).unwrap();
        save_schema(&meta, &SchemaDocument::new(&schema, Some(2))).unwrap();
        let loaded = load_dataset::<f64>(&data, &meta).unwrap();
        assert_eq!(loaded.samples, samples);
        assert_eq!(loaded.schema, schema);
    }

    #[test]
    fn transform_standardises_continuous_columns() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("d.csv");
        std::fs::write(&data, "sample_id,t,f_0,f_1\na,0,12,1\n").unwrap();
        let meta = dir.path().join("s.json");
        std::fs::write(
            &meta,
            r#"{"features":[{"name":"a","kind":"continuous"},{"name":"b","kind":"discrete","cardinality":2}],
                "transform":[{"shift":10,"scale":4},{"shift":5,"scale":5}]}"#,
        )
        .unwrap();
        let loaded = load_dataset::<f64>(&data, &meta).unwrap();
        assert_eq!(loaded.samples[0].sample.as_slice(), &[0.5, 1.0]);
    }

    #[test]
    fn missing_schema_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_dataset::<f64>(dir.path().join("a.csv"), dir.path().join("none.json")),
            Err(CfxError::Io { .. })
        ));
    }
}
