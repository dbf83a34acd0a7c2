//! Versioned verification reports.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliResult;

pub const SCHEMA_VERSION: u32 = 1;

/// How a measured value is compared against the tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    /// `measured < tolerance`.
    Below,
    /// `measured > tolerance`.
    Above,
    /// `measured == expected`, for integer counts.
    Equals(f64),
    /// `|measured - target| <= tolerance`.
    Near(f64),
}

impl Criterion {
    fn holds(self, measured: f64, tolerance: f64) -> bool {
        match self {
            Criterion::Below => measured < tolerance,
            Criterion::Above => measured > tolerance,
            Criterion::Equals(e) => measured == e,
            Criterion::Near(t) => (measured - t).abs() <= tolerance,
        }
    }

    fn describe(self) -> String {
        match self {
            Criterion::Below => "measured < tolerance".into(),
            Criterion::Above => "measured > tolerance".into(),
            Criterion::Equals(e) => format!("measured == {e}"),
            Criterion::Near(t) => format!("|measured - {t}| <= tolerance"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub id: String,
    /// SHA-256 of the canonical JSON of the check inputs.
    pub inputs_digest: String,
    /// `null` when the computation failed.
    pub measured: Option<f64>,
    pub tolerance: f64,
    pub criterion: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub suite: String,
    pub schema_version: u32,
    pub environment: Value,
    pub checks: Vec<CheckRecord>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<Value>,
}

impl VerificationReport {
    pub fn to_json(&self) -> CliResult<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// One row per check.
    pub fn write_csv<W: Write>(&self, writer: W) -> CliResult<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            suite: &'a str,
            id: &'a str,
            inputs_digest: &'a str,
            measured: Option<f64>,
            tolerance: f64,
            criterion: &'a str,
            pass: bool,
            error: &'a str,
            runtime_ms: Option<f64>,
        }
        let mut w = csv::Writer::from_writer(writer);
        for c in &self.checks {
            w.serialize(Row {
                suite: &self.suite,
                id: &c.id,
                inputs_digest: &c.inputs_digest,
                measured: c.measured,
                tolerance: c.tolerance,
                criterion: &c.criterion,
                pass: c.pass,
                error: c.error.as_deref().unwrap_or(""),
                runtime_ms: c.runtime_ms,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn check(&self, id: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.id == id)
    }
}

pub fn digest(value: &Value) -> String {
    // serde_json maps are ordered by key, so this is canonical
    let text = serde_json::to_string(value).unwrap_or_default();
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Accumulates checks; `environment` entries are shared by every check digest.
pub struct ReportBuilder {
    suite: String,
    environment: serde_json::Map<String, Value>,
    checks: Vec<CheckRecord>,
    timings: bool,
    data: serde_json::Map<String, Value>,
}

impl ReportBuilder {
    pub fn new(suite: &str, timings: bool) -> Self {
        Self {
            suite: suite.into(),
            environment: serde_json::Map::new(),
            checks: Vec::new(),
            timings,
            data: serde_json::Map::new(),
        }
    }

    pub fn env(&mut self, key: &str, value: impl Serialize) {
        self.environment.insert(key.into(), json!(value));
    }

    pub fn data(&mut self, key: &str, value: impl Serialize) {
        self.data.insert(key.into(), json!(value));
    }

    /// Runs `f`, records its value against `criterion`, and returns the value.
    pub fn check<F>(&mut self, id: &str, inputs: Value, tolerance: f64, criterion: Criterion, f: F) -> Option<f64>
    where
        F: FnOnce() -> CliResult<f64>,
    {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        let digest = digest(&json!({
            "suite": self.suite,
            "id": id,
            "environment": Value::Object(self.environment.clone()),
            "inputs": inputs,
        }));
        let (measured, error) = match outcome {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let pass = measured.is_some_and(|m| m.is_finite() && criterion.holds(m, tolerance));
        self.checks.push(CheckRecord {
            id: id.into(),
            inputs_digest: digest,
            measured: measured.filter(|m| m.is_finite()),
            tolerance,
            criterion: criterion.describe(),
            pass,
            error,
            runtime_ms: self.timings.then_some(elapsed),
        });
        measured
    }

    pub fn finish(self) -> VerificationReport {
        let pass = !self.checks.is_empty() && self.checks.iter().all(|c| c.pass);
        VerificationReport {
            suite: self.suite,
            schema_version: SCHEMA_VERSION,
            environment: Value::Object(self.environment),
            checks: self.checks,
            pass,
            data: (!self.data.is_empty()).then_some(Value::Object(self.data)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::CliError;

    #[test]
    fn overall_pass_is_the_conjunction() {
        let mut b = ReportBuilder::new("t", false);
        b.env("seed", 0);
        b.check("a", json!({}), 1e-3, Criterion::Below, || Ok(1e-4));
        b.check("b", json!({}), 0.0, Criterion::Equals(3.0), || Ok(3.0));
        b.check("c", json!({}), 1e-3, Criterion::Near(1.0), || Ok(1.0005));
        let r = b.finish();
        assert!(r.pass);
        assert_eq!(r.schema_version, 1);

        let mut b = ReportBuilder::new("t", false);
        b.check("a", json!({}), 1e-3, Criterion::Below, || Ok(1e-4));
        b.check("b", json!({}), 0.0, Criterion::Above, || Err(CliError::Usage("boom".into())));
        let r = b.finish();
        assert!(!r.pass);
        assert_eq!(r.checks[1].measured, None);
        assert!(r.checks[1].error.is_some());
    }

    #[test]
    fn digests_depend_on_inputs_not_outcomes() {
        let run = |v: f64, input: f64| {
            let mut b = ReportBuilder::new("t", false);
            b.check("a", json!({ "x": input }), 1.0, Criterion::Below, || Ok(v));
            b.finish().checks[0].inputs_digest.clone()
        };
        assert_eq!(run(0.1, 1.0), run(0.2, 1.0));
        assert_ne!(run(0.1, 1.0), run(0.1, 2.0));
        assert_eq!(run(0.1, 1.0).len(), 64);
    }

    #[test]
    fn nan_fails_and_serializes() {
        let mut b = ReportBuilder::new("t", false);
        b.check("a", json!({}), 1.0, Criterion::Below, || Ok(f64::NAN));
        let r = b.finish();
        assert!(!r.pass);
        let text = r.to_json().unwrap();
        assert!(text.contains("\"measured\": null"));
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert!(csv.starts_with("suite,id,inputs_digest,measured,tolerance,criterion,pass,error,runtime_ms\n"));
        assert_eq!(csv.lines().count(), 2);
    }
}
