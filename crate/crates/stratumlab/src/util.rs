//! Small shared numeric and record helpers.

use crate::core::{Arm, ObservedRecord};
use crate::error::{Error, Result};

/// Order-normalizes records by id so that estimators are invariant to the
/// caller's record order. Ties (duplicate ids in bootstrap resamples) keep
/// their relative order.
pub(crate) fn sorted_refs<'a>(records: &'a [&'a ObservedRecord]) -> Vec<&'a ObservedRecord> {
    let mut refs: Vec<&ObservedRecord> = records.to_vec();
    refs.sort_by(|a, b| a.id.cmp(&b.id));
    refs
}

pub(crate) fn as_refs(records: &[ObservedRecord]) -> Vec<&ObservedRecord> {
    records.iter().collect()
}

/// Splits into (control, test), preserving input order.
pub(crate) fn split_arms<'a>(
    records: &[&'a ObservedRecord],
) -> (Vec<&'a ObservedRecord>, Vec<&'a ObservedRecord>) {
    let mut control = Vec::new();
    let mut test = Vec::new();
    for r in records {
        match r.z {
            Arm::Control => control.push(*r),
            Arm::Test => test.push(*r),
        }
    }
    (control, test)
}

pub(crate) fn require_nonempty_arms(
    control: &[&ObservedRecord],
    test: &[&ObservedRecord],
) -> Result<()> {
    if control.is_empty() {
        return Err(Error::EmptyArm { arm: "control" });
    }
    if test.is_empty() {
        return Err(Error::EmptyArm { arm: "treated" });
    }
    Ok(())
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub(crate) fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

pub(crate) fn sample_sd(values: &[f64]) -> f64 {
    sample_variance(values).sqrt()
}

/// Weighted mean. Exactly equal weights reduce to the plain mean so that
/// constant-weight analyses are bit-identical to their unweighted form.
pub(crate) fn weighted_mean(values: &[f64], weights: &[f64]) -> Result<f64> {
    debug_assert_eq!(values.len(), weights.len());
    if values.is_empty() {
        return Err(Error::invalid("weighted mean of an empty set"));
    }
    if weights.iter().all(|w| *w == weights[0]) {
        if weights[0] <= 0.0 {
            return Err(Error::invalid("weights sum to zero"));
        }
        return Ok(mean(values));
    }
    let sum_w: f64 = weights.iter().sum();
    if sum_w <= 0.0 {
        return Err(Error::invalid("weights sum to zero"));
    }
    let sum_wy: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    Ok(sum_wy / sum_w)
}

/// Effective sample size of a weight vector, `(sum w)^2 / sum w^2`, clamped
/// to the number of weights. Exactly equal weights give exactly `n`.
pub(crate) fn effective_sample_size(weights: &[f64]) -> f64 {
    if weights.is_empty() {
        return 0.0;
    }
    if weights.iter().all(|w| *w == weights[0]) {
        return if weights[0] == 0.0 {
            0.0
        } else {
            weights.len() as f64
        };
    }
    let sum: f64 = weights.iter().sum();
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    if sum_sq == 0.0 {
        return 0.0;
    }
    (sum * sum / sum_sq).min(weights.len() as f64)
}

pub(crate) fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Outcome values for mean-type contrasts; errors on time-to-event records.
pub(crate) fn numeric_outcomes(records: &[&ObservedRecord]) -> Result<Vec<f64>> {
    records.iter().map(|r| r.y.numeric_value()).collect()
}

pub(crate) fn observed_status(record: &ObservedRecord) -> Result<bool> {
    record.s.ok_or_else(|| {
        Error::invalid(format!(
            "record '{}' has no observed intercurrent status",
            record.id
        ))
    })
}
