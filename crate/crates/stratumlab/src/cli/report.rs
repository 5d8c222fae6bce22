//! Report structure shared by `analyze`, `sensitivity`, and `benchmark`.
//!
//! Reports are plain data serialized to canonical JSON (alphabetically sorted
//! keys, no timestamps), so identical inputs and seed produce byte-identical
//! files.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cli::config::AnalysisConfig;
use crate::core::{Arm, EstimateResult, ObservedRecord, OutcomeKind};
use crate::error::Result;
use crate::estimators::BoundsResult;
use crate::sensitivity::{RelaxationPoint, ScanEntry, SensitivityCurve};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Per-method outcome inside a report: method-level failures are recorded,
/// they do not abort the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MethodOutcome {
    Estimate(EstimateResult),
    Bounds(BoundsResult),
    Error { message: String },
}

impl MethodOutcome {
    pub fn is_error(&self) -> bool {
        matches!(self, MethodOutcome::Error { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub n: usize,
    pub n_control: usize,
    pub n_treated: usize,
    /// Observed intercurrent-event rate per arm (missing statuses excluded).
    /// Comparing them is the testable implication of monotonicity.
    pub s_rate_control: Option<f64>,
    pub s_rate_treated: Option<f64>,
    pub s_missing_control: usize,
    pub s_missing_treated: usize,
    pub outcome_kind: OutcomeKind,
    pub covariates: Vec<String>,
}

impl DataSummary {
    pub fn from_records(records: &[ObservedRecord]) -> Self {
        let mut n_control = 0;
        let mut n_treated = 0;
        let mut s1_control = 0usize;
        let mut s1_treated = 0usize;
        let mut missing_control = 0usize;
        let mut missing_treated = 0usize;
        for r in records {
            match r.z {
                Arm::Control => {
                    n_control += 1;
                    match r.s {
                        Some(true) => s1_control += 1,
                        Some(false) => {}
                        None => missing_control += 1,
                    }
                }
                Arm::Test => {
                    n_treated += 1;
                    match r.s {
                        Some(true) => s1_treated += 1,
                        Some(false) => {}
                        None => missing_treated += 1,
                    }
                }
            }
        }
        let rate = |s1: usize, missing: usize, n: usize| {
            let observed = n - missing;
            (observed > 0).then(|| s1 as f64 / observed as f64)
        };
        DataSummary {
            n: records.len(),
            n_control,
            n_treated,
            s_rate_control: rate(s1_control, missing_control, n_control),
            s_rate_treated: rate(s1_treated, missing_treated, n_treated),
            s_missing_control: missing_control,
            s_missing_treated: missing_treated,
            outcome_kind: records
                .first()
                .map(|r| r.y.kind())
                .unwrap_or(OutcomeKind::Continuous),
            covariates: records
                .first()
                .map(|r| r.x.names().map(|n| n.to_string()).collect())
                .unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SensitivityReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tipping: Option<SensitivityCurve>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tipping_error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotonicity_relaxation: Option<Vec<RelaxationPoint>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotonicity_relaxation_error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariate_scan: Option<Vec<ScanEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariate_scan_error: Option<String>,
}

impl SensitivityReport {
    pub fn is_empty(&self) -> bool {
        self.tipping.is_none()
            && self.tipping_error.is_none()
            && self.monotonicity_relaxation.is_none()
            && self.monotonicity_relaxation_error.is_none()
            && self.covariate_scan.is_none()
            && self.covariate_scan_error.is_none()
    }
}

/// Oracle block attached only when the data were simulated in this process,
/// so the truth is available in memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleBlock {
    pub estimand_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub seed: u64,
    pub data_summary: DataSummary,
    pub estimates: BTreeMap<String, MethodOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<SensitivityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleBlock>,
    /// The fully resolved configuration, embedded for reproducibility.
    pub config: AnalysisConfig,
}

impl Report {
    pub fn method_failures(&self) -> usize {
        self.estimates.values().filter(|o| o.is_error()).count()
    }

    /// Canonical JSON: keys sorted alphabetically. Re-parsing and re-emitting
    /// is byte-identical.
    pub fn to_canonical_json(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        Ok(text)
    }
}
