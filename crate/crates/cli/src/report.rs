use serde::Serialize;
use serde_json::Value;
use vesselkit::{Complex64, Config};

use crate::error::CliError;
use crate::schema::{entry, Entry, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances {
    pub tol: f64,
    pub steps_per_unit: usize,
    pub probes: usize,
    pub seed: u64,
}

impl From<&Config> for Tolerances {
    fn from(c: &Config) -> Self {
        Tolerances { tol: c.tol, steps_per_unit: c.steps_per_unit, probes: c.probes, seed: c.seed }
    }
}

/// One row of the residual table. `passed` is absent for diagnostics that
/// carry no threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub name: String,
    pub value: Option<f64>,
    pub node: Option<usize>,
    pub allowance: Option<f64>,
    pub passed: Option<bool>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl Residual {
    pub fn checked(name: &str, value: f64, threshold: f64) -> Self {
        Residual {
            name: name.into(),
            value: finite(value),
            node: None,
            allowance: None,
            passed: Some(value.is_finite() && value <= threshold),
        }
    }

    pub fn info(name: &str, value: f64) -> Self {
        Residual { name: name.into(), value: finite(value), node: None, allowance: None, passed: None }
    }

    pub fn at_node(mut self, node: usize) -> Self {
        self.node = Some(node);
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Probes {
    pub lambdas: Vec<Entry>,
    pub nodes: Vec<usize>,
}

impl Probes {
    pub fn new(lambdas: &[Complex64], nodes: &[usize]) -> Self {
        Probes { lambdas: lambdas.iter().map(|z| entry(*z)).collect(), nodes: nodes.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorEntry {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: &'static str,
    pub command: String,
    pub arguments: Vec<String>,
    pub tolerances: Option<Tolerances>,
    pub residuals: Vec<Residual>,
    pub probes: Probes,
    pub result: Value,
    pub passed: bool,
    pub error: Option<ErrorEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
}

impl Report {
    pub fn new(command: &str, arguments: &[String], config: Option<&Config>) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            arguments: arguments.to_vec(),
            tolerances: config.map(Tolerances::from),
            residuals: Vec::new(),
            probes: Probes::default(),
            result: Value::Null,
            passed: true,
            error: None,
            timing_ms: None,
        }
    }

    pub fn failed_residuals(&self) -> Vec<&str> {
        self.residuals.iter().filter(|r| r.passed == Some(false)).map(|r| r.name.as_str()).collect()
    }

    pub fn with_error(mut self, e: &CliError) -> Self {
        self.passed = false;
        self.error = Some(ErrorEntry { kind: e.kind().into(), message: e.message().into() });
        self
    }

    /// Exit code implied by the report.
    pub fn exit_code(&self) -> i32 {
        match &self.error {
            Some(e) if e.kind == "input" => 1,
            Some(e) if e.kind == "numerical" => 2,
            Some(_) => 3,
            None if self.failed_residuals().is_empty() => 0,
            None => 3,
        }
    }
}
