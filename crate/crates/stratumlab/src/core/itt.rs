//! Assumption-free intention-to-treat contrast and the stratum-proportion
//! identities implied by monotonicity.

use std::collections::BTreeMap;

use crate::core::types::{
    Arm, Contrast, EstimateResult, MonotonicityDirection, ObservedRecord, OutcomeKind,
    PrincipalStratum,
};
use crate::error::{Error, Result};
use crate::estimators::bootstrap::{bootstrap_ci, BootstrapConfig};
use crate::util;

/// Tolerance separating rounding error from a genuine monotonicity violation.
pub const MONOTONICITY_TOLERANCE: f64 = 1e-12;

fn itt_statistic(records: &[&ObservedRecord], contrast: Contrast) -> Result<f64> {
    let (control, test) = util::split_arms(records);
    util::require_nonempty_arms(&control, &test)?;
    let control_mean = util::mean(&util::numeric_outcomes(&control)?);
    let test_mean = util::mean(&util::numeric_outcomes(&test)?);
    contrast.combine(test_mean, control_mean)
}

/// Difference (or ratio) of arm averages in the full randomized population.
///
/// The benchmark every stratum-specific estimator is compared against: it is
/// the one contrast identified by randomization alone.
pub fn itt_effect(
    records: &[ObservedRecord],
    contrast: Contrast,
    bootstrap: &BootstrapConfig,
) -> Result<EstimateResult> {
    if contrast.is_survival() {
        return Err(Error::invalid(
            "survival contrasts are computed by stratum_survival_contrast",
        ));
    }
    let refs = util::as_refs(records);
    let refs = util::sorted_refs(&refs);
    check_uniform_outcome_kind(&refs)?;
    if contrast.is_ratio() || contrast == Contrast::RiskDifference {
        require_kind(&refs, OutcomeKind::Binary, contrast)?;
    }

    let estimate = itt_statistic(&refs, contrast)?;
    let ci = bootstrap_ci(|r| itt_statistic(r, contrast), &refs, bootstrap)?;

    Ok(
        EstimateResult::new("itt", estimate, refs.len() as f64)
            .with_ci(ci.lower, ci.upper)
            .with_diag("bootstrap_replicates", ci.used)
            .with_diag("bootstrap_failures", ci.failures),
    )
}

pub(crate) fn check_uniform_outcome_kind(records: &[&ObservedRecord]) -> Result<OutcomeKind> {
    let mut kind: Option<OutcomeKind> = None;
    for r in records {
        match kind {
            None => kind = Some(r.y.kind()),
            Some(k) if k == r.y.kind() => {}
            Some(k) => {
                return Err(Error::invalid(format!(
                    "records mix outcome kinds ({k} and {})",
                    r.y.kind()
                )))
            }
        }
    }
    kind.ok_or_else(|| Error::invalid("no records"))
}

fn require_kind(records: &[&ObservedRecord], kind: OutcomeKind, contrast: Contrast) -> Result<()> {
    let actual = check_uniform_outcome_kind(records)?;
    if actual != kind {
        return Err(Error::invalid(format!(
            "{} requires a {kind} outcome, got {actual}",
            contrast.label()
        )));
    }
    Ok(())
}

/// Share of records with `s == 1` on one arm. Errors when any status is
/// missing or the arm is empty.
pub(crate) fn status_rate(records: &[&ObservedRecord], arm: Arm) -> Result<f64> {
    let on_arm: Vec<&&ObservedRecord> = records.iter().filter(|r| r.z == arm).collect();
    if on_arm.is_empty() {
        return Err(Error::EmptyArm { arm: arm.label() });
    }
    let mut count = 0usize;
    for r in &on_arm {
        if util::observed_status(r)? {
            count += 1;
        }
    }
    Ok(count as f64 / on_arm.len() as f64)
}

/// Cell proportions implied by observed status rates, a monotonicity
/// direction, and a fixed proportion for the excluded ("defier") cell.
///
/// With margins `p0 = P(S=1|control)` and `p1 = P(S=1|test)` the three
/// remaining cells are determined by the two margins once the excluded cell
/// is pinned. Negative allocations beyond [`MONOTONICITY_TOLERANCE`] are an
/// error; tiny negative rounding residue is clamped to zero.
pub(crate) fn proportions_with_defier(
    p0: f64,
    p1: f64,
    direction: MonotonicityDirection,
    defier: f64,
) -> Result<[f64; 4]> {
    let (both, control_only, neither, test_only) = match direction {
        MonotonicityDirection::S0GeS1 => {
            let test_only = defier;
            let both = p1 - defier;
            let control_only = p0 - p1 + defier;
            let neither = 1.0 - p0 - defier;
            (both, control_only, neither, test_only)
        }
        MonotonicityDirection::S1GeS0 => {
            let control_only = defier;
            let both = p0 - defier;
            let test_only = p1 - p0 + defier;
            let neither = 1.0 - p1 - defier;
            (both, control_only, neither, test_only)
        }
    };
    let raw = [both, control_only, neither, test_only];
    let mut out = [0.0; 4];
    for (slot, value) in out.iter_mut().zip(raw) {
        if value < -MONOTONICITY_TOLERANCE {
            return Err(Error::MonotonicityContradicted { implied: value });
        }
        *slot = value.max(0.0);
    }
    // out is in the order (both, control_only, neither, test_only), which is
    // the canonical PrincipalStratum::ALL order.
    Ok(out)
}

/// Estimates the four principal-stratum proportions under a monotonicity
/// direction, which empties one cell and identifies the rest from the two
/// observed status rates.
///
/// The implied proportion of the stratum moved by treatment can be negative
/// when the data contradict the assumed direction; that testable implication
/// is surfaced as an error carrying the negative value.
pub fn stratum_proportions_monotone(
    records: &[ObservedRecord],
    direction: MonotonicityDirection,
) -> Result<BTreeMap<PrincipalStratum, f64>> {
    let refs = util::as_refs(records);
    let refs = util::sorted_refs(&refs);
    let p0 = status_rate(&refs, Arm::Control)?;
    let p1 = status_rate(&refs, Arm::Test)?;
    let proportions = proportions_with_defier(p0, p1, direction, 0.0)?;
    Ok(PrincipalStratum::ALL
        .into_iter()
        .zip(proportions)
        .collect())
}
