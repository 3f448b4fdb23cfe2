//! Scenario reports: one record per check, serializable as JSON (stable field
//! order, deviations as 12-significant-digit decimal strings), CSV and text.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::Result;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Undetermined,
}

impl std::fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::Undetermined => "undetermined",
        };
        f.write_str(s)
    }
}

/// Format a deviation with 12 significant digits, as a decimal string.
pub fn format_deviation(x: f64) -> String {
    format!("{x:.11e}")
}

fn serialize_deviation<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_some(&format_deviation(*v)),
        None => s.serialize_none(),
    }
}

/// One verified property inside a scenario run.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    /// Which mathematical statement the check verifies.
    pub reference: String,
    pub status: CheckStatus,
    #[serde(serialize_with = "serialize_deviation")]
    pub max_deviation: Option<f64>,
    pub witnesses: Vec<String>,
}

impl CheckRecord {
    pub fn new(name: impl Into<String>, reference: impl Into<String>, status: CheckStatus) -> Self {
        Self {
            name: name.into(),
            reference: reference.into(),
            status,
            max_deviation: None,
            witnesses: Vec::new(),
        }
    }

    pub fn with_deviation(mut self, deviation: f64) -> Self {
        self.max_deviation = Some(deviation);
        self
    }

    pub fn with_witness(mut self, witness: impl Into<String>) -> Self {
        self.witnesses.push(witness.into());
        self
    }
}

/// A full scenario run.
#[derive(Debug, Clone)]
pub struct Report {
    pub scenario: String,
    pub parameters: BTreeMap<String, String>,
    pub samples: u64,
    pub seed: u64,
    pub checks: Vec<CheckRecord>,
    /// Wall-clock duration; excluded from determinism comparisons.
    pub timing_ms: Option<f64>,
    pub version: String,
}

impl Serialize for Report {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Report", 8)?;
        st.serialize_field("schema_version", SCHEMA_VERSION)?;
        st.serialize_field("version", &self.version)?;
        st.serialize_field("scenario", &self.scenario)?;
        st.serialize_field("parameters", &self.parameters)?;
        st.serialize_field("samples", &self.samples)?;
        st.serialize_field("seed", &self.seed)?;
        st.serialize_field("checks", &self.checks)?;
        st.serialize_field("timing_ms", &self.timing_ms)?;
        st.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Text,
}

impl std::str::FromStr for ReportFormat {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "text" => Ok(ReportFormat::Text),
            other => Err(crate::error::Error::Config(format!("unknown format `{other}`"))),
        }
    }
}

impl Report {
    pub fn new(scenario: impl Into<String>, samples: u64, seed: u64) -> Self {
        Self {
            scenario: scenario.into(),
            parameters: BTreeMap::new(),
            samples,
            seed,
            checks: Vec::new(),
            timing_ms: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn any_failed(&self) -> bool {
        self.checks.iter().any(|c| c.status == CheckStatus::Fail)
    }

    pub fn find(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// JSON with stable field order. Timing may be excluded so identical runs
    /// are byte-identical.
    pub fn to_json(&self, include_timing: bool) -> Result<String> {
        let mut clone = self.clone();
        if !include_timing {
            clone.timing_ms = None;
        }
        Ok(serde_json::to_string_pretty(&clone)?)
    }

    /// One CSV row per check.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,check,reference,status,max_deviation,witnesses\n");
        for c in &self.checks {
            let deviation = c.max_deviation.map(format_deviation).unwrap_or_default();
            let witnesses = c.witnesses.join("; ");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                csv_field(&self.scenario),
                csv_field(&c.name),
                csv_field(&c.reference),
                c.status,
                deviation,
                csv_field(&witnesses),
            );
        }
        out
    }

    /// Human-readable summary.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario {} (seed {}, samples {})", self.scenario, self.seed, self.samples);
        for (k, v) in &self.parameters {
            let _ = writeln!(out, "  param {k} = {v}");
        }
        for c in &self.checks {
            let deviation = c
                .max_deviation
                .map(|d| format!(" deviation={}", format_deviation(d)))
                .unwrap_or_default();
            let _ = writeln!(out, "  [{}] {}{} ({})", c.status, c.name, deviation, c.reference);
            for w in &c.witnesses {
                let _ = writeln!(out, "      - {w}");
            }
        }
        let passed = self.checks.iter().filter(|c| c.status == CheckStatus::Pass).count();
        let failed = self.checks.iter().filter(|c| c.status == CheckStatus::Fail).count();
        let undet = self.checks.iter().filter(|c| c.status == CheckStatus::Undetermined).count();
        let _ = writeln!(out, "  => {passed} passed, {failed} failed, {undet} undetermined");
        out
    }

    pub fn render(&self, format: ReportFormat, include_timing: bool) -> Result<String> {
        match format {
            ReportFormat::Json => self.to_json(include_timing),
            ReportFormat::Csv => Ok(self.to_csv()),
            ReportFormat::Text => Ok(self.to_text()),
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> Report {
        let mut r = Report::new("demo", 10, 42);
        r.parameters.insert("k".into(), "3".into());
        r.checks.push(
            CheckRecord::new("alpha", "effect functoriality", CheckStatus::Pass)
                .with_deviation(1.2345678901234e-9)
                .with_witness("w1"),
        );
        r.checks.push(CheckRecord::new("beta", "orbit map", CheckStatus::Undetermined));
        r.timing_ms = Some(12.5);
        r
    }

    #[test]
    fn json_has_stable_shape_and_deviation_strings() {
        let r = sample_report();
        let json = r.to_json(true).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["schema_version"], "1");
        assert_eq!(v["checks"][0]["max_deviation"], "1.23456789012e-9");
        // Round-trip within half an ulp of the 12-digit decimal.
        let parsed: f64 = v["checks"][0]["max_deviation"].as_str().unwrap().parse().unwrap();
        let original = 1.2345678901234e-9f64;
        assert!((parsed - original).abs() <= 0.5e-11 * original.abs());
    }

    #[test]
    fn csv_row_count_matches_checks() {
        let r = sample_report();
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 1 + r.checks.len());
    }

    #[test]
    fn timing_is_excluded_on_demand() {
        let r = sample_report();
        let with_timing = r.to_json(true).unwrap();
        let without = r.to_json(false).unwrap();
        assert!(with_timing.contains("12.5"));
        assert!(!without.contains("12.5"));
        assert!(without.contains("\"timing_ms\": null"));
    }
}
