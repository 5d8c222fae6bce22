//! Wald estimator for the stratum moved by treatment, valid under
//! monotonicity plus the exclusion restriction.
//!
//! Under monotonicity only one cell changes status with treatment, and the
//! exclusion restriction zeroes the outcome effect in the unchanged cells, so
//! the full ITT difference is attributable to the moved cell and scales by
//! its proportion: the ratio of the ITT outcome difference to the ITT status
//! difference.

use crate::core::{
    stratum_proportions_monotone, EstimateResult, MonotonicityDirection, ObservedRecord,
};
use crate::error::{Error, Result};
use crate::estimators::bootstrap::{bootstrap_ci, BootstrapConfig};
use crate::util;

const DENOMINATOR_FLOOR: f64 = 1e-6;

fn wald_statistic(records: &[&ObservedRecord]) -> Result<f64> {
    let (control, test) = util::split_arms(records);
    util::require_nonempty_arms(&control, &test)?;

    let status = |arm: &[&ObservedRecord]| -> Result<f64> {
        let mut count = 0usize;
        for r in arm {
            if util::observed_status(r)? {
                count += 1;
            }
        }
        Ok(count as f64 / arm.len() as f64)
    };
    let p0 = status(&control)?;
    let p1 = status(&test)?;
    let denominator = p1 - p0;
    if denominator.abs() <= DENOMINATOR_FLOOR {
        return Err(Error::CaceNotIdentified);
    }
    let numerator =
        util::mean(&util::numeric_outcomes(&test)?) - util::mean(&util::numeric_outcomes(&control)?);
    Ok(numerator / denominator)
}

/// The ITT outcome difference divided by the ITT status difference: the mean
/// effect in the single stratum whose status is moved by treatment.
///
/// Callers must declare the monotonicity direction; the data are first
/// checked against its testable implication via
/// [`stratum_proportions_monotone`].
pub fn wald_cace(
    records: &[ObservedRecord],
    direction: MonotonicityDirection,
    bootstrap: &BootstrapConfig,
) -> Result<EstimateResult> {
    let proportions = stratum_proportions_monotone(records, direction)?;
    let refs = util::as_refs(records);
    let refs = util::sorted_refs(&refs);

    let estimate = wald_statistic(&refs)?;
    let ci = bootstrap_ci(wald_statistic, &refs, bootstrap)?;

    let moved_cell = match direction {
        MonotonicityDirection::S0GeS1 => crate::core::PrincipalStratum::EventControlOnly,
        MonotonicityDirection::S1GeS0 => crate::core::PrincipalStratum::EventTestOnly,
    };
    Ok(EstimateResult::new("wald_cace", estimate, refs.len() as f64)
        .with_ci(ci.lower, ci.upper)
        .with_diag("moved_stratum", moved_cell.name())
        .with_diag("moved_stratum_proportion", proportions[&moved_cell])
        .with_diag("bootstrap_replicates", ci.used)
        .with_diag("bootstrap_failures", ci.failures))
}
