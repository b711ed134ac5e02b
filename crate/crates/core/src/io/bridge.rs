//! Models served by an external process over a line protocol.
//!
//! Each query writes one JSON line `{"steps": K, "features": W, "values":
//! [...]}` (row-major) to the child's stdin and reads one line holding a
//! single real from its stdout. The child stays alive between queries.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{CfxError, Result};
use crate::models::PredictiveModel;
use crate::sample::SeriesSample;
use crate::scalar::Scalar;
use crate::schema::{FeatureKind, FeatureSchema};

pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;

/// How discrete cells are sent to the child.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscreteEncoding {
    /// One column per feature holding the category code.
    #[default]
    Integer,
    /// One 0/1 column per category.
    OneHot,
}

#[derive(Serialize)]
struct Request {
    steps: usize,
    features: usize,
    values: Vec<f64>,
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Session {
    fn spawn(command: &[String]) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| CfxError::Config("external model command is empty".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| CfxError::Model(format!("cannot start `{program}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            lines,
        })
    }

    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A [`PredictiveModel`] backed by a child process. Queries from several
/// threads are serialized.
pub struct ExternalModel<T> {
    command: Vec<String>,
    timeout: Duration,
    encoding: DiscreteEncoding,
    schema: FeatureSchema<T>,
    session: Mutex<Option<Session>>,
}

impl<T: Scalar> ExternalModel<T> {
    /// Starts the child immediately so a bad command fails here.
    pub fn spawn(
        command: Vec<String>,
        schema: FeatureSchema<T>,
        timeout: Duration,
        encoding: DiscreteEncoding,
    ) -> Result<Self> {
        let session = Session::spawn(&command)?;
        Ok(Self {
            command,
            timeout,
            encoding,
            schema,
            session: Mutex::new(Some(session)),
        })
    }

    /// Serialized request line for `sample`, without the newline.
    pub fn encode(&self, sample: &SeriesSample<T>) -> Result<String> {
        self.schema.validate_sample(sample)?;
        let mut values: Vec<f64> = Vec::new();
        let mut width = 0;
        for k in 0..sample.steps() {
            let before = values.len();
            for (d, &v) in sample.row(k).iter().enumerate() {
                match (self.encoding, self.schema.feature(d).kind) {
                    (DiscreteEncoding::OneHot, FeatureKind::Discrete { cardinality }) => {
                        let code = v.to_usize().unwrap_or(usize::MAX);
                        values.extend((0..cardinality).map(|c| if c == code { 1.0 } else { 0.0 }));
                    }
                    _ => values.push(v.as_f64()),
                }
            }
            width = values.len() - before;
        }
        serde_json::to_string(&Request {
            steps: sample.steps(),
            features: width,
            values,
        })
        .map_err(|e| CfxError::Model(format!("cannot encode request: {e}")))
    }

    fn query(&self, session: &mut Session, request: &str) -> Result<T> {
        writeln!(session.stdin, "{request}")
            .and_then(|_| session.stdin.flush())
            .map_err(|e| CfxError::Model(format!("cannot write to external model: {e}")))?;
        let line = match session.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => {
                return Err(CfxError::Model(format!(
                    "cannot read external model output: {e}"
                )))
            }
            Err(RecvTimeoutError::Timeout) => {
                return Err(CfxError::Model(format!(
                    "external model did not answer within {} ms",
                    self.timeout.as_millis()
                )))
            }
            Err(RecvTimeoutError::Disconnected) => {
                return Err(CfxError::Model("external model exited".into()));
            }
        };
        let value: f64 = line.trim().parse().map_err(|_| {
            CfxError::Model(format!(
                "external model printed `{}`, not a number",
                line.trim()
            ))
        })?;
        if !value.is_finite() {
            return Err(CfxError::Model(format!(
                "external model printed non-finite {value}"
            )));
        }
        Ok(T::lit(value))
    }
}

impl<T: Scalar> PredictiveModel<T> for ExternalModel<T> {
    fn predict(&self, sample: &SeriesSample<T>) -> Result<T> {
        let request = self.encode(sample)?;
        let mut guard = self.session.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            *guard = Some(Session::spawn(&self.command)?);
        }
        let session = guard.as_mut().expect("session present");
        let result = self.query(session, &request);
        if result.is_err() {
            // the stream may be out of step; restart on the next query
            if let Some(s) = guard.take() {
                s.kill();
            }
        }
        result
    }
}

impl<T> Drop for ExternalModel<T> {
    fn drop(&mut self) {
        if let Some(s) = self.session.get_mut().ok().and_then(Option::take) {
            s.kill();
        }
    }
}
