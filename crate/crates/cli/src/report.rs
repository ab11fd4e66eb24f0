//! Machine-readable run reports.

use serde::{Deserialize, Serialize};

use qgaudin_core::integrate::InvariantDrift;

use crate::config::RunConfig;

/// One pass/fail flag with the measured value and its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

impl Check {
    /// Passes when `value <= threshold` (a NaN value fails).
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value <= threshold,
            value: Some(value),
            threshold: Some(threshold),
            detail: detail.into(),
        }
    }

    pub fn flag(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, value: None, threshold: None, detail: detail.into() }
    }

    /// `PASS`/`FAIL` line for terminal output.
    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        match (self.value, self.threshold) {
            (Some(v), Some(t)) => format!("{tag} {}: {v:.3e} (limit {t:.1e}) {}", self.name, self.detail),
            _ => format!("{tag} {}: {}", self.name, self.detail),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub quantity: String,
    pub drift: f64,
    pub conserved: bool,
}

/// Closed form against integration for one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub m: usize,
    pub form: String,
    pub max_abs_dev: Option<f64>,
    pub passed: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRow {
    pub m: usize,
    pub measured: Option<f64>,
    pub predicted: Option<f64>,
    pub rel_err: Option<f64>,
    pub error: Option<String>,
}

/// One point of a parameter scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub value: f64,
    pub max_drift: Option<f64>,
    /// Distance to the reference: the undeformed flow for `z` scans, the
    /// closed form otherwise.
    pub deviation: Option<f64>,
    pub field_residual: Option<f64>,
    pub periods: Vec<PeriodRow>,
    pub passed: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Option<RunConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub drift: Vec<DriftRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<ErrorRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub periods: Vec<PeriodRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scan: Vec<ScanPoint>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl Report {
    pub fn new(command: &str, config: Option<RunConfig>) -> Self {
        Self {
            tool: "qgaudin".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            drift: Vec::new(),
            errors: Vec::new(),
            periods: Vec::new(),
            scan: Vec::new(),
            checks: Vec::new(),
            passed: true,
        }
    }

    pub fn push(&mut self, c: Check) {
        self.passed &= c.passed;
        self.checks.push(c);
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Drift rows with `C^(m)` / `C^(N-m)` labels.
pub fn drift_rows(d: &InvariantDrift) -> Vec<DriftRow> {
    let n = d.tower.len().div_ceil(2);
    let mut rows: Vec<DriftRow> = d
        .tower
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let quantity = if i < n { format!("C^({})", i + 1) } else { format!("C^(N-{})", i + 1 - n) };
            DriftRow { quantity, drift: v, conserved: true }
        })
        .collect();
    rows.push(DriftRow { quantity: "delta3".into(), drift: d.d3, conserved: d.d3_conserved });
    rows.push(DriftRow { quantity: "delta+".into(), drift: d.dplus, conserved: true });
    rows.push(DriftRow { quantity: "delta-".into(), drift: d.dminus, conserved: true });
    rows.push(DriftRow { quantity: "H".into(), drift: d.energy, conserved: true });
    rows
}
