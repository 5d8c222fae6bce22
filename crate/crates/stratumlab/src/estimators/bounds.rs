//! Assumption-free identification bounds via the trimming construction.
//!
//! For a stratum defined by one arm's status, that arm identifies its own
//! outcome component directly, while the other arm is a q : (1-q) mixture of
//! stratum members and non-members. The extreme trimmed means of the mixture
//! bound the unidentified component: the mean of the `ceil(q * n)` largest
//! outcomes from above, the mean of the `ceil(q * n)` smallest from below.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::core::{
    check_uniform_outcome_kind, Arm, Contrast, EstimandSpec, ObservedRecord, OutcomeKind,
    PrincipalStratum,
};
use crate::error::{Error, Result};
use crate::estimators::bootstrap::{bootstrap_draws, percentile_interval, BootstrapConfig};
use crate::util;

/// Interval estimate for a partially identified contrast.
///
/// `test_component` and `control_component` are the implied intervals for
/// `E[Y(1)|stratum]` and `E[Y(0)|stratum]`; a point-identified side has a
/// degenerate interval. Outer confidence limits bootstrap each bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsResult {
    pub lower: f64,
    pub upper: f64,
    pub test_component: (f64, f64),
    pub control_component: (f64, f64),
    pub ci_lower_outer: Option<f64>,
    pub ci_upper_outer: Option<f64>,
    pub method: String,
    pub diagnostics: BTreeMap<String, serde_json::Value>,
}

/// Mean of the `ceil(q * n)` smallest and largest outcomes. Ties at the cut
/// are resolved by (outcome, id) lexicographic order.
fn trimmed_mean_bounds(records: &[&ObservedRecord], q: f64) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::invalid("cannot trim an empty sample"));
    }
    let mut values: Vec<(f64, &str)> = records
        .iter()
        .map(|r| Ok((r.y.numeric_value()?, r.id.as_str())))
        .collect::<Result<_>>()?;
    values.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    let n = values.len();
    let m = ((q * n as f64).ceil() as usize).clamp(1, n);
    let lower = values[..m].iter().map(|(v, _)| v).sum::<f64>() / m as f64;
    let upper = values[n - m..].iter().map(|(v, _)| v).sum::<f64>() / m as f64;
    Ok((lower, upper))
}

fn combine_intervals(
    contrast: Contrast,
    test: (f64, f64),
    control: (f64, f64),
) -> Result<(f64, f64)> {
    match contrast {
        Contrast::RiskDifference | Contrast::MeanDifference => {
            Ok((test.0 - control.1, test.1 - control.0))
        }
        Contrast::RiskRatio => {
            if control.0 <= 0.0 || control.1 <= 0.0 {
                return Err(Error::UndefinedRatio);
            }
            Ok((test.0 / control.1, test.1 / control.0))
        }
        _ => Err(Error::invalid(
            "bounds support mean and risk contrasts only",
        )),
    }
}

fn check_outcome_support(
    records: &[&ObservedRecord],
    outcome_range: Option<(f64, f64)>,
) -> Result<()> {
    match check_uniform_outcome_kind(records)? {
        OutcomeKind::Binary => Ok(()),
        OutcomeKind::Continuous => {
            let (a, b) = outcome_range.ok_or(Error::MissingOutcomeRange)?;
            if !(a < b) {
                return Err(Error::invalid("outcome range must satisfy a < b"));
            }
            for r in records {
                let v = r.y.numeric_value()?;
                if v < a || v > b {
                    return Err(Error::invalid(format!(
                        "outcome {v} of record '{}' is outside the declared range [{a}, {b}]",
                        r.id
                    )));
                }
            }
            Ok(())
        }
        OutcomeKind::TimeToEvent => Err(Error::invalid(
            "bounds support binary or bounded continuous outcomes",
        )),
    }
}

struct TrimmingPoint {
    lower: f64,
    upper: f64,
    test: (f64, f64),
    control: (f64, f64),
    q_hat: f64,
}

fn trimming_statistic(
    records: &[&ObservedRecord],
    spec: &EstimandSpec,
    defining_arm: Arm,
    defining_value: bool,
) -> Result<TrimmingPoint> {
    let (control, test) = util::split_arms(records);
    util::require_nonempty_arms(&control, &test)?;
    let (defining, other) = match defining_arm {
        Arm::Test => (&test, &control),
        Arm::Control => (&control, &test),
    };

    let mut members = Vec::new();
    for r in defining.iter() {
        if util::observed_status(r)? == defining_value {
            members.push(*r);
        }
    }
    let q_hat = members.len() as f64 / defining.len() as f64;
    if members.is_empty() {
        return Err(Error::StratumEmptyOnArm {
            arm: defining_arm.label(),
        });
    }

    let identified = util::mean(&util::numeric_outcomes(&members)?);
    let trimmed = trimmed_mean_bounds(other, q_hat)?;

    let (test_iv, control_iv) = match defining_arm {
        Arm::Test => ((identified, identified), trimmed),
        Arm::Control => (trimmed, (identified, identified)),
    };
    let (lower, upper) = combine_intervals(spec.contrast, test_iv, control_iv)?;
    Ok(TrimmingPoint {
        lower,
        upper,
        test: test_iv,
        control: control_iv,
        q_hat,
    })
}

/// Identification bounds for a stratum defined by one arm's status, without
/// any cross-world assumption.
///
/// `outcome_range` must declare the support `[a, b]` for continuous outcomes;
/// binary outcomes need no declaration. Outer confidence limits come from
/// bootstrapping each bound.
pub fn trimming_bounds(
    records: &[ObservedRecord],
    spec: &EstimandSpec,
    outcome_range: Option<(f64, f64)>,
    bootstrap: &BootstrapConfig,
) -> Result<BoundsResult> {
    let (defining_arm, defining_value) = spec.stratum.defining_status().ok_or_else(|| {
        Error::invalid(format!(
            "trimming bounds need a stratum defined by one arm's status, got '{}'",
            spec.stratum
        ))
    })?;
    let refs = util::as_refs(records);
    let refs = util::sorted_refs(&refs);
    check_outcome_support(&refs, outcome_range)?;
    spec.validate_for(check_uniform_outcome_kind(&refs)?)?;

    let point = trimming_statistic(&refs, spec, defining_arm, defining_value)?;
    let draws = bootstrap_draws(
        |r| {
            let p = trimming_statistic(r, spec, defining_arm, defining_value)?;
            Ok(vec![p.lower, p.upper])
        },
        &refs,
        bootstrap,
    )?;
    let mut lowers: Vec<f64> = draws.samples.iter().map(|s| s[0]).collect();
    let mut uppers: Vec<f64> = draws.samples.iter().map(|s| s[1]).collect();
    lowers.sort_by(|a, b| a.total_cmp(b));
    uppers.sort_by(|a, b| a.total_cmp(b));
    let (ci_lower, _) = percentile_interval(&lowers);
    let (_, ci_upper) = percentile_interval(&uppers);

    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("q_hat".to_string(), serde_json::json!(point.q_hat));
    diagnostics.insert(
        "bootstrap_failures".to_string(),
        serde_json::json!(draws.failures),
    );
    Ok(BoundsResult {
        lower: point.lower,
        upper: point.upper,
        test_component: point.test,
        control_component: point.control,
        ci_lower_outer: Some(ci_lower),
        ci_upper_outer: Some(ci_upper),
        method: "trimming_bounds".to_string(),
        diagnostics,
    })
}

/// Bounds for a single cell given full cell proportions (from a monotonicity
/// assumption, possibly relaxed). Both arms' status subgroups are mixtures
/// here, so both components are trimmed.
pub(crate) fn cell_bounds_with_proportions(
    records: &[&ObservedRecord],
    cell: PrincipalStratum,
    proportions: &[f64; 4],
    contrast: Contrast,
) -> Result<BoundsResult> {
    let (control, test) = util::split_arms(records);
    util::require_nonempty_arms(&control, &test)?;
    let (cell_s0, cell_s1) = cell.statuses();
    let pi_cell = proportions[cell.index()];

    let component = |arm_records: &[&ObservedRecord], arm: Arm, status: bool| -> Result<(f64, f64)> {
        let mut subgroup = Vec::new();
        for r in arm_records {
            if util::observed_status(r)? == status {
                subgroup.push(*r);
            }
        }
        if subgroup.is_empty() {
            return Err(Error::invalid(format!(
                "no records with observed status {} to trim",
                u8::from(status)
            )));
        }
        // Share of the subgroup that belongs to the target cell.
        let margin: f64 = PrincipalStratum::ALL
            .into_iter()
            .filter(|c| c.status_under(arm) == status)
            .map(|c| proportions[c.index()])
            .sum();
        if margin <= 0.0 {
            return Err(Error::invalid("empty margin under the given proportions"));
        }
        let q = (pi_cell / margin).min(1.0);
        if q <= 0.0 {
            return Err(Error::TargetStratumVanishes { proportion: pi_cell });
        }
        trimmed_mean_bounds(&subgroup, q)
    };

    let control_iv = component(&control, Arm::Control, cell_s0)?;
    let test_iv = component(&test, Arm::Test, cell_s1)?;
    let (lower, upper) = combine_intervals(contrast, test_iv, control_iv)?;
    Ok(BoundsResult {
        lower,
        upper,
        test_component: test_iv,
        control_component: control_iv,
        ci_lower_outer: None,
        ci_upper_outer: None,
        method: "trimming_bounds_monotone".to_string(),
        diagnostics: BTreeMap::new(),
    })
}
