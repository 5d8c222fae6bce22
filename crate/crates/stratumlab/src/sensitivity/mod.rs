//! Sensitivity and tipping-point machinery: scan unverifiable-assumption
//! parameters, recompute the estimate per grid point, and locate where the
//! study conclusion flips.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::core::{
    proportions_with_defier, status_rate, Arm, EstimandSpec, EstimateResult, MonotonicityDirection,
    ObservedRecord,
};
use crate::error::{Error, Result};
use crate::estimators::bootstrap::{bootstrap_ci, BootstrapConfig};
use crate::estimators::{cell_bounds_with_proportions, trimming_bounds, weighting_statistic, BoundsResult};
use crate::util;

/// Default tipping grid: 41 points on [-2, 2].
pub fn default_beta_grid() -> Vec<f64> {
    (0..41).map(|i| -2.0 + 0.1 * i as f64).collect()
}

/// One evaluated grid point; failed points carry their error message instead
/// of being fatal to the scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PointOutcome {
    Ok {
        estimate: f64,
        ci_lower: f64,
        ci_upper: f64,
    },
    Failed {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPoint {
    pub beta: f64,
    pub outcome: PointOutcome,
}

/// Grid of (beta, estimate, interval) with the detected tipping point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCurve {
    pub grid: Vec<SensitivityPoint>,
    /// Interpolated beta at which the interval first touches the null when
    /// walking outward from the point nearest beta = 0; absent when the
    /// baseline conclusion already includes the null or never flips.
    pub tipping_point: Option<f64>,
    /// 0 for difference contrasts, 1 for ratios.
    pub null_value: f64,
}

/// Tipping-point scan for the principal-ignorability weighting estimator.
///
/// Principal ignorability asserts that the control outcome carries no
/// information about membership beyond the covariates. Each grid beta
/// contradicts that by `expit(logit(e(x)) + beta * y)`: a control subject's
/// own observed outcome tilts its membership odds. Beta = 0 reproduces
/// `pi_weighting` bit-exactly under the same seed.
pub fn tipping_scan_pi(
    records: &[ObservedRecord],
    spec: &EstimandSpec,
    covariates: &[String],
    beta_grid: &[f64],
    bootstrap: &BootstrapConfig,
) -> Result<SensitivityCurve> {
    if beta_grid.is_empty() {
        return Err(Error::invalid("beta grid must be nonempty"));
    }
    if beta_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("beta grid must be strictly increasing"));
    }
    match spec.stratum.defining_status() {
        Some((Arm::Test, _)) => {}
        _ => {
            return Err(Error::invalid(
                "the tipping scan tilts membership defined by the test arm's status; \
                 the stratum must be defined by S(1)",
            ))
        }
    }
    let refs = util::as_refs(records);
    let refs = util::sorted_refs(&refs);

    // Every grid point reuses the same master seed so that resample paths
    // match across betas (and the beta = 0 point matches pi_weighting).
    let grid: Vec<SensitivityPoint> = beta_grid
        .par_iter()
        .map(|&beta| {
            let tilt = if beta == 0.0 { None } else { Some(beta) };
            let outcome = (|| -> Result<PointOutcome> {
                let point = weighting_statistic(&refs, spec, covariates, tilt)?;
                let ci = bootstrap_ci(
                    |r| weighting_statistic(r, spec, covariates, tilt).map(|p| p.estimate),
                    &refs,
                    bootstrap,
                )?;
                Ok(PointOutcome::Ok {
                    estimate: point.estimate,
                    ci_lower: ci.lower,
                    ci_upper: ci.upper,
                })
            })();
            SensitivityPoint {
                beta,
                outcome: outcome.unwrap_or_else(|e| PointOutcome::Failed {
                    message: e.to_string(),
                }),
            }
        })
        .collect();

    let null_value = spec.contrast.null_value();
    let tipping_point = detect_tipping(&grid, null_value);
    Ok(SensitivityCurve {
        grid,
        tipping_point,
        null_value,
    })
}

/// Walks outward from the grid point nearest beta = 0; where the interval
/// transitions from excluding the null to touching it, linearly interpolates
/// the crossing of the bound nearer the null. When both directions flip, the
/// smaller |beta| wins.
fn detect_tipping(grid: &[SensitivityPoint], null_value: f64) -> Option<f64> {
    let ok = |p: &SensitivityPoint| match &p.outcome {
        PointOutcome::Ok {
            ci_lower, ci_upper, ..
        } => Some((*ci_lower, *ci_upper)),
        PointOutcome::Failed { .. } => None,
    };
    let excludes = |bounds: (f64, f64)| bounds.0 > null_value || bounds.1 < null_value;

    let anchor = grid
        .iter()
        .enumerate()
        .filter(|(_, p)| ok(p).is_some())
        .min_by(|(_, a), (_, b)| a.beta.abs().total_cmp(&b.beta.abs()))?
        .0;
    let anchor_bounds = ok(&grid[anchor])?;
    if !excludes(anchor_bounds) {
        return None;
    }
    // The bound closer to the null at the anchor is the one whose crossing
    // flips the conclusion.
    let lower_side = anchor_bounds.0 > null_value;

    let crossing = |from: &SensitivityPoint, to: &SensitivityPoint| -> Option<f64> {
        let (a, b) = (ok(from)?, ok(to)?);
        if !excludes(a) || excludes(b) {
            return None;
        }
        let (va, vb) = if lower_side { (a.0, b.0) } else { (a.1, b.1) };
        if (vb - va).abs() < f64::EPSILON {
            return Some(to.beta);
        }
        let t = (null_value - va) / (vb - va);
        Some(from.beta + t.clamp(0.0, 1.0) * (to.beta - from.beta))
    };

    let mut candidates = Vec::new();
    for i in anchor..grid.len().saturating_sub(1) {
        if let Some(beta) = crossing(&grid[i], &grid[i + 1]) {
            candidates.push(beta);
            break;
        }
    }
    for i in (1..=anchor).rev() {
        if let Some(beta) = crossing(&grid[i], &grid[i - 1]) {
            candidates.push(beta);
            break;
        }
    }
    candidates.into_iter().min_by(|a, b| a.abs().total_cmp(&b.abs()))
}

/// One grid point of the monotonicity relaxation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationPoint {
    pub defier_proportion: f64,
    pub feasible: bool,
    /// Cell proportions in canonical order, present when feasible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proportions: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Relaxes strict monotonicity by fixing the excluded cell's proportion at
/// each grid value, reallocating the remaining mass from the observed status
/// margins, and recomputing trimming bounds for the target stratum.
///
/// Infeasible allocations (the margins cannot absorb the defier mass) are
/// marked and skipped. Grid point 0 reproduces the unrelaxed analysis.
pub fn monotonicity_relaxation(
    records: &[ObservedRecord],
    spec: &EstimandSpec,
    direction: MonotonicityDirection,
    defier_grid: &[f64],
    outcome_range: Option<(f64, f64)>,
    bootstrap: &BootstrapConfig,
) -> Result<Vec<RelaxationPoint>> {
    if defier_grid.is_empty() {
        return Err(Error::invalid("defier grid must be nonempty"));
    }
    let refs = util::as_refs(records);
    let refs = util::sorted_refs(&refs);
    let p0 = status_rate(&refs, Arm::Control)?;
    let p1 = status_rate(&refs, Arm::Test)?;

    let single_cell = spec.stratum.as_single_cell();
    let is_one_arm_set = spec.stratum.defining_status().is_some();
    if single_cell.is_none() && !is_one_arm_set {
        return Err(Error::invalid(format!(
            "monotonicity relaxation needs a single cell or a one-arm stratum set, got '{}'",
            spec.stratum
        )));
    }
    if let Some(cell) = single_cell {
        if cell == direction.excluded_cell() {
            return Err(Error::invalid(format!(
                "target stratum '{}' is the cell excluded by {direction}",
                cell.name()
            )));
        }
    }

    let mut points = Vec::with_capacity(defier_grid.len());
    for &defier in defier_grid {
        if !(0.0..=1.0).contains(&defier) {
            points.push(RelaxationPoint {
                defier_proportion: defier,
                feasible: false,
                proportions: None,
                bounds: None,
                error: Some("defier proportion outside [0, 1]".to_string()),
            });
            continue;
        }
        let proportions = match proportions_with_defier(p0, p1, direction, defier) {
            Ok(p) => p,
            Err(e) => {
                points.push(RelaxationPoint {
                    defier_proportion: defier,
                    feasible: false,
                    proportions: None,
                    bounds: None,
                    error: Some(e.to_string()),
                });
                continue;
            }
        };
        let bounds = match single_cell {
            Some(cell) => cell_bounds_with_proportions(&refs, cell, &proportions, spec.contrast),
            None => trimming_bounds(records, spec, outcome_range, bootstrap),
        };
        match bounds {
            Ok(b) => points.push(RelaxationPoint {
                defier_proportion: defier,
                feasible: true,
                proportions: Some(proportions),
                bounds: Some(b),
                error: None,
            }),
            Err(e) => points.push(RelaxationPoint {
                defier_proportion: defier,
                feasible: false,
                proportions: Some(proportions),
                bounds: None,
                error: Some(e.to_string()),
            }),
        }
    }
    if points.iter().all(|p| !p.feasible) {
        return Err(Error::invalid(
            "every defier-grid point is infeasible for the observed status margins",
        ));
    }
    Ok(points)
}

/// One covariate-set scan entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub label: String,
    pub covariates: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<EstimateResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub(crate) fn covariate_set_label(set: &[String]) -> String {
    if set.is_empty() {
        "(intercept-only)".to_string()
    } else {
        set.join("+")
    }
}

/// Runs the weighting estimator once per covariate set with a shared seed.
/// The intercept-only baseline (empty set) is always included; output is
/// sorted by label. Per-set failures are recorded, not fatal.
pub fn covariate_set_scan(
    records: &[ObservedRecord],
    spec: &EstimandSpec,
    covariate_sets: &[Vec<String>],
    bootstrap: &BootstrapConfig,
) -> Result<Vec<ScanEntry>> {
    if covariate_sets.is_empty() {
        return Err(Error::invalid("at least one covariate set is required"));
    }
    let mut sets: Vec<Vec<String>> = Vec::new();
    if !covariate_sets.iter().any(|s| s.is_empty()) {
        sets.push(Vec::new());
    }
    sets.extend(covariate_sets.iter().cloned());

    let mut entries: Vec<ScanEntry> = sets
        .par_iter()
        .map(|set| {
            let label = covariate_set_label(set);
            match crate::estimators::pi_weighting(records, spec, set, bootstrap) {
                Ok(result) => ScanEntry {
                    label,
                    covariates: set.clone(),
                    result: Some(result),
                    error: None,
                },
                Err(e) => ScanEntry {
                    label,
                    covariates: set.clone(),
                    result: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    entries.sort_by(|a, b| a.label.cmp(&b.label));
    Ok(entries)
}
