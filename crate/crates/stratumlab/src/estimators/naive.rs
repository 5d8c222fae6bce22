//! The naive subset analysis: condition each arm on its observed
//! post-randomization status.
//!
//! This is the analysis the principal-stratum machinery exists to replace:
//! subsetting both arms on the observed `S` compares populations selected by
//! different potential outcomes and is unbiased only when treatment does not
//! move `S` at all. The result is flagged accordingly.

use crate::core::{EstimandSpec, EstimateResult, ObservedRecord, StratumSet};
use crate::error::{Error, Result};
use crate::estimators::bootstrap::{bootstrap_ci, BootstrapConfig};
use crate::util;

/// The observed-status value that defines membership in a stratum set for the
/// naive analysis (and for the trimming construction).
pub(crate) fn defining_value(stratum: &StratumSet) -> Result<bool> {
    if let Some((_, value)) = stratum.defining_status() {
        return Ok(value);
    }
    if let Some(value) = stratum.concordant_value() {
        return Ok(value);
    }
    Err(Error::invalid(format!(
        "naive conditioning needs a one-arm stratum set or a concordant cell, got '{stratum}'"
    )))
}

fn naive_statistic(
    records: &[&ObservedRecord],
    spec: &EstimandSpec,
    value: bool,
) -> Result<(f64, usize)> {
    let (control, test) = util::split_arms(records);
    util::require_nonempty_arms(&control, &test)?;
    let subset = |arm: Vec<&ObservedRecord>, label: &'static str| -> Result<Vec<f64>> {
        let mut values = Vec::new();
        for r in arm {
            if util::observed_status(r)? == value {
                values.push(r.y.numeric_value()?);
            }
        }
        if values.is_empty() {
            return Err(Error::StratumEmptyOnArm { arm: label });
        }
        Ok(values)
    };
    let control_values = subset(control, "control")?;
    let test_values = subset(test, "treated")?;
    let estimate = spec
        .contrast
        .combine(util::mean(&test_values), util::mean(&control_values))?;
    Ok((estimate, control_values.len() + test_values.len()))
}

/// Subsets each arm by its observed status matching the stratum's defining
/// value and computes the contrast on the subsets.
pub fn naive_conditioning(
    records: &[ObservedRecord],
    spec: &EstimandSpec,
    bootstrap: &BootstrapConfig,
) -> Result<EstimateResult> {
    let value = defining_value(&spec.stratum)?;
    let refs = util::as_refs(records);
    let refs = util::sorted_refs(&refs);
    spec.validate_for(crate::core::check_uniform_outcome_kind(&refs)?)?;
    if spec.contrast.is_survival() {
        return Err(Error::invalid(
            "naive conditioning supports mean and risk contrasts only",
        ));
    }

    let (estimate, n_used) = naive_statistic(&refs, spec, value)?;
    let ci = bootstrap_ci(
        |r| naive_statistic(r, spec, value).map(|(e, _)| e),
        &refs,
        bootstrap,
    )?;

    Ok(EstimateResult::new("naive_conditioning", estimate, n_used as f64)
        .with_ci(ci.lower, ci.upper)
        .with_diag("biased_unless", "S(1)=S(0) for all subjects")
        .with_diag("bootstrap_replicates", ci.used)
        .with_diag("bootstrap_failures", ci.failures))
}
