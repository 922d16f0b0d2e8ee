//! Machine-readable experiment reports.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use scatterlab::Vector;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Vector(Vec<f64>),
    Text(String),
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Number(x)
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Number(x as f64)
    }
}

impl From<&Vector> for Value {
    fn from(v: &Vector) -> Self {
        Value::Vector(v.as_slice().to_vec())
    }
}

impl From<Vector> for Value {
    fn from(v: Vector) -> Self {
        Value::Vector(v.as_slice().to_vec())
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// Passes when `value <= tolerance`.
    Max,
    /// Passes when `value >= tolerance`.
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub bound: Bound,
    pub pass: bool,
}

impl Residual {
    pub fn new(name: impl Into<String>, value: f64, tolerance: f64, bound: Bound) -> Self {
        let pass = value.is_finite()
            && match bound {
                Bound::Max => value <= tolerance,
                Bound::Min => value >= tolerance,
            };
        Self {
            name: name.into(),
            value,
            tolerance,
            bound,
            pass,
        }
    }

    /// `value / tolerance` (or its inverse for lower bounds); at most 1 iff the residual passes.
    pub fn severity(&self) -> f64 {
        if !self.value.is_finite() {
            return f64::INFINITY;
        }
        let ratio = match self.bound {
            Bound::Max if self.tolerance > 0.0 => self.value / self.tolerance,
            Bound::Max => {
                if self.value <= 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Bound::Min if self.value > 0.0 => self.tolerance / self.value,
            Bound::Min => f64::INFINITY,
        };
        ratio.max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub index: usize,
    pub label: String,
    pub inputs: BTreeMap<String, Value>,
    pub outputs: BTreeMap<String, Value>,
    pub residuals: Vec<Residual>,
    pub pass: bool,
}

impl Record {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            index: 0,
            label: label.into(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            residuals: Vec::new(),
            pass: true,
        }
    }

    pub fn input(mut self, name: &str, value: impl Into<Value>) -> Self {
        self.inputs.insert(name.to_string(), value.into());
        self
    }

    pub fn output(mut self, name: &str, value: impl Into<Value>) -> Self {
        self.outputs.insert(name.to_string(), value.into());
        self
    }

    pub fn max(self, name: &str, value: f64, tolerance: f64) -> Self {
        self.residual(Residual::new(name, value, tolerance, Bound::Max))
    }

    pub fn min(self, name: &str, value: f64, tolerance: f64) -> Self {
        self.residual(Residual::new(name, value, tolerance, Bound::Min))
    }

    pub fn residual(mut self, r: Residual) -> Self {
        self.pass &= r.pass;
        self.residuals.push(r);
        self
    }

    pub fn severity(&self) -> f64 {
        self.residuals.iter().map(Residual::severity).fold(0.0, f64::max)
    }
}

/// The record that stopped a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureInfo {
    pub record: usize,
    pub label: String,
    pub message: String,
}

/// Residuals are reported as severities, `value / tolerance`, so the run
/// passes iff `max_residual <= 1` and no record failed to compute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub records: usize,
    pub failed_records: usize,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub experiment: String,
    pub scenario: String,
    pub scenario_kind: String,
    pub seed: u64,
    pub parameters: BTreeMap<String, f64>,
    pub records: Vec<Record>,
    pub summary: Summary,
    pub failure: Option<FailureInfo>,
}

impl Report {
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        experiment: &str,
        scenario: &str,
        scenario_kind: &str,
        seed: u64,
        parameters: BTreeMap<String, f64>,
        mut records: Vec<Record>,
        failure: Option<FailureInfo>,
        wall_time_s: f64,
    ) -> Self {
        for (i, r) in records.iter_mut().enumerate() {
            r.index = i;
        }
        let sev: Vec<f64> = records.iter().map(Record::severity).collect();
        let max_residual = sev.iter().copied().fold(0.0, f64::max);
        let mean_residual = if sev.is_empty() {
            0.0
        } else {
            sev.iter().sum::<f64>() / sev.len() as f64
        };
        let failed = records.iter().filter(|r| !r.pass).count();
        let pass = failure.is_none() && failed == 0 && !records.is_empty() && max_residual <= 1.0;
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.to_string(),
            scenario: scenario.to_string(),
            scenario_kind: scenario_kind.to_string(),
            seed,
            parameters,
            summary: Summary {
                records: records.len(),
                failed_records: failed,
                max_residual,
                mean_residual,
                tolerance: 1.0,
                pass,
                wall_time_s,
            },
            records,
            failure,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Largest value of each residual name across records, with its tolerance.
    pub fn residual_maxima(&self) -> Vec<Residual> {
        let mut out: Vec<Residual> = Vec::new();
        for r in &self.records {
            for res in &r.residuals {
                match out.iter_mut().find(|o| o.name == res.name) {
                    Some(o) => {
                        if res.severity() > o.severity() || (!res.value.is_finite() && o.value.is_finite()) {
                            *o = res.clone();
                        }
                    }
                    None => out.push(res.clone()),
                }
            }
        }
        out
    }

    /// One row per scalar: `record, label, section, name, value`.
    pub fn write_csv(&self, path: &Path) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["record", "label", "section", "name", "value"])?;
        for r in &self.records {
            let idx = r.index.to_string();
            let mut row = |section: &str, name: &str, value: String| {
                w.write_record([idx.as_str(), r.label.as_str(), section, name, value.as_str()])
            };
            for (section, map) in [("input", &r.inputs), ("output", &r.outputs)] {
                for (name, v) in map {
                    match v {
                        Value::Number(x) => row(section, name, format!("{x:e}"))?,
                        Value::Text(t) => row(section, name, t.clone())?,
                        Value::Vector(xs) => {
                            for (i, x) in xs.iter().enumerate() {
                                row(section, &format!("{name}[{i}]"), format!("{x:e}"))?;
                            }
                        }
                    }
                }
            }
            for res in &r.residuals {
                row("residual", &res.name, format!("{:e}", res.value))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, out: Option<&Path>) -> anyhow::Result<()> {
        let text = self.to_json();
        match out {
            Some(p) => std::fs::write(p, text)?,
            None => std::io::stdout().write_all(text.as_bytes())?,
        }
        Ok(())
    }
}
