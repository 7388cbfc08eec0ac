//! CSV and JSON report emission.
//!
//! Step counts can exceed 64 bits, so they are serialized as decimal
//! strings everywhere. Floats go through Rust's shortest-roundtrip
//! formatting, which is deterministic: re-running a run with its echoed
//! configuration reproduces the files byte for byte.

use crate::analytics::{ConditionHCertificate, GapReport};
use crate::verify::InvariantResult;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// One CSV row; columns are exactly
/// `J,n,ratio_p,ratio_phat,birkhoff_avg,schedule_family`.
#[derive(Debug, Clone, Serialize)]
pub struct CsvRow {
    pub j: usize,
    pub n: u128,
    pub ratio_p: f64,
    pub ratio_phat: f64,
    pub birkhoff_avg: f64,
    pub schedule_family: String,
}

pub fn render_csv(rows: &[CsvRow]) -> String {
    let mut out = String::from("J,n,ratio_p,ratio_phat,birkhoff_avg,schedule_family\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.j, r.n, r.ratio_p, r.ratio_phat, r.birkhoff_avg, r.schedule_family
        ));
    }
    out
}

/// Predicted constants of a run; fields that do not apply to a scenario
/// stay `None` and are omitted from the JSON.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PredictedBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda1_pred: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda2_pred: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_pred: Option<f64>,
    pub nu0: u32,
    pub rho0: f64,
    pub delta0: f64,
    pub x_p: f64,
    pub x_phat: f64,
}

/// Final-point trapped ratios for one `(nu, delta)` combination.
#[derive(Debug, Clone, Serialize)]
pub struct RatioSummary {
    pub nu: u32,
    pub delta: f64,
    pub n1_ratio_p: f64,
    pub n1_ratio_phat: f64,
    pub n2_ratio_p: f64,
    pub n2_ratio_phat: f64,
    pub certified: bool,
    pub final_deviation: f64,
}

/// Convergence statistics of a control scenario.
#[derive(Debug, Clone, Serialize)]
pub struct ControlStats {
    pub seeds: u32,
    pub converged_seeds: u32,
    pub convergence_tolerance: f64,
    pub max_avg_shift: f64,
    /// 95th percentile of `|avg(n/2) - avg(n)|` across seeds.
    pub p95_avg_shift: f64,
    /// Largest gap between the orbit average and the section-orbit
    /// average (rotation control only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub section_avg_gap: Option<f64>,
}

/// The JSON run summary; schema documented in `docs/report_schema.md`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub version: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub predicted: PredictedBlock,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ratio_summaries: Vec<RatioSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_measured: Option<f64>,
    /// A two-scale certificate was issued and the averaged gap clears the
    /// scenario threshold; always false for the control scenarios.
    pub historic: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<ConditionHCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub no_certificate_reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlStats>,
    /// Symbolic schedule for reproducibility, when one was built.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule_points: Option<Vec<u64>>,
    /// Schedule horizons as decimal strings (may exceed 64 bits).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule_n1: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule_n2: Option<Vec<String>>,
    pub invariants: Vec<InvariantResult>,
    pub notes: Vec<String>,
    /// Scenario-level acceptance verdict (thresholds pinned in code).
    pub pass: bool,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Write both report files into a directory, creating it if needed.
pub fn write_outputs(dir: &Path, rows: &[CsvRow], report: &RunReport) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut csv = std::fs::File::create(dir.join("report.csv"))?;
    csv.write_all(render_csv(rows).as_bytes())?;
    let mut json = std::fs::File::create(dir.join("report.json"))?;
    json.write_all(report.to_json().as_bytes())?;
    json.write_all(b"\n")?;
    Ok(())
}
