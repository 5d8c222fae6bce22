//! Time-to-event estimands: weighted product-limit curves, survival and
//! restricted-mean contrasts, and landmark handling for outcomes that compete
//! with observing the intercurrent status.

use serde::{Deserialize, Serialize};

use crate::core::{
    check_uniform_outcome_kind, Arm, CovariateSchema, EstimandSpec, EstimateResult,
    ObservedRecord, OutcomeKind,
};
use crate::error::{Error, Result};
use crate::estimators::bootstrap::{bootstrap_ci, BootstrapConfig};
use crate::estimators::glm::DesignMatrix;
use crate::estimators::{fit_status_propensity, resolve_defining_status};
use crate::util;

/// Weighted product-limit curve: survival after each distinct event time,
/// with the weighted at-risk and event sums that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    /// Distinct event times, strictly increasing.
    pub times: Vec<f64>,
    /// Survival value just after each event time.
    pub survival: Vec<f64>,
    /// Weighted at-risk count at each event time.
    pub at_risk: Vec<f64>,
    /// Weighted event count at each event time.
    pub events: Vec<f64>,
    /// Largest observed time (event or censoring); the follow-up horizon.
    pub max_follow_up: f64,
}

impl SurvivalCurve {
    /// Step-function evaluation; 1 before the first event time.
    pub fn eval(&self, t: f64) -> f64 {
        match self.times.partition_point(|time| *time <= t) {
            0 => 1.0,
            k => self.survival[k - 1],
        }
    }

    /// Area under the curve on `[0, t_star]` by exact rectangle integration
    /// of the step function: the restricted mean survival time.
    pub fn rmst(&self, t_star: f64) -> f64 {
        let mut area = 0.0;
        let mut previous_time = 0.0;
        let mut previous_value = 1.0;
        for (time, value) in self.times.iter().zip(&self.survival) {
            if *time >= t_star {
                break;
            }
            area += previous_value * (time - previous_time);
            previous_time = *time;
            previous_value = *value;
        }
        area + previous_value * (t_star - previous_time)
    }
}

/// Weighted Kaplan-Meier product-limit estimator.
///
/// At tied times, events precede censorings: both still count as at risk at
/// that time, and censored subjects leave the risk set afterwards.
pub fn weighted_km(times: &[f64], events: &[bool], weights: &[f64]) -> Result<SurvivalCurve> {
    let n = times.len();
    if events.len() != n || weights.len() != n {
        return Err(Error::invalid(
            "times, events, and weights must have equal lengths",
        ));
    }
    if n == 0 {
        return Err(Error::invalid("no subjects"));
    }
    for (t, w) in times.iter().zip(weights) {
        if !t.is_finite() || *t < 0.0 {
            return Err(Error::invalid("times must be finite and nonnegative"));
        }
        if !w.is_finite() || *w < 0.0 {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
    }
    let total_weight: f64 = weights.iter().sum();
    if total_weight <= 0.0 {
        return Err(Error::invalid("all weights zero"));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let mut curve = SurvivalCurve {
        times: Vec::new(),
        survival: Vec::new(),
        at_risk: Vec::new(),
        events: Vec::new(),
        max_follow_up: times.iter().copied().fold(0.0, f64::max),
    };

    let mut at_risk = total_weight;
    let mut survival = 1.0;
    let mut i = 0;
    while i < n {
        let time = times[order[i]];
        let mut event_weight = 0.0;
        let mut leaving_weight = 0.0;
        while i < n && times[order[i]] == time {
            let idx = order[i];
            leaving_weight += weights[idx];
            if events[idx] {
                event_weight += weights[idx];
            }
            i += 1;
        }
        if event_weight > 0.0 && at_risk > 0.0 {
            survival *= 1.0 - event_weight / at_risk;
            curve.times.push(time);
            curve.at_risk.push(at_risk);
            curve.events.push(event_weight);
            curve.survival.push(survival);
        }
        at_risk -= leaving_weight;
    }
    Ok(curve)
}

fn check_follow_up(curve1: &SurvivalCurve, curve0: &SurvivalCurve, t_star: f64) -> Result<()> {
    if t_star > curve1.max_follow_up || t_star > curve0.max_follow_up {
        return Err(Error::TStarExceedsFollowUp);
    }
    Ok(())
}

/// Difference of the two step functions at `t_star`.
pub fn survival_diff_at(
    curve1: &SurvivalCurve,
    curve0: &SurvivalCurve,
    t_star: f64,
) -> Result<f64> {
    check_follow_up(curve1, curve0, t_star)?;
    Ok(curve1.eval(t_star) - curve0.eval(t_star))
}

/// Difference of restricted mean survival times on `[0, t_star]`.
pub fn rmst_diff(curve1: &SurvivalCurve, curve0: &SurvivalCurve, t_star: f64) -> Result<f64> {
    check_follow_up(curve1, curve0, t_star)?;
    Ok(curve1.rmst(t_star) - curve0.rmst(t_star))
}

/// Records conditioned on follow-up beyond the landmark, tagged with it.
#[derive(Debug, Clone, PartialEq)]
pub struct Landmarked {
    pub landmark: f64,
    pub records: Vec<ObservedRecord>,
}

/// Conditions both arms on being under follow-up beyond the landmark:
/// removes every record whose event or censoring time is before `t~` and
/// keeps the original time scale. Downstream estimands read "conditional on
/// Y > t~".
///
/// Records that survive the restriction must carry an observed status, since
/// the status is assessed at `t~`.
pub fn landmark_restriction(records: &[ObservedRecord], landmark: f64) -> Result<Landmarked> {
    if !landmark.is_finite() || landmark < 0.0 {
        return Err(Error::invalid("landmark must be nonnegative and finite"));
    }
    let mut kept = Vec::new();
    for r in records {
        let (time, _) = r.y.time_event()?;
        if time < landmark {
            continue;
        }
        if r.s.is_none() {
            return Err(Error::StatusMissingAfterLandmark { id: r.id.clone() });
        }
        kept.push(r.clone());
    }
    if kept.is_empty() {
        return Err(Error::EmptyAfterLandmark { landmark });
    }
    Ok(Landmarked {
        landmark,
        records: kept,
    })
}

struct SurvivalPoint {
    estimate: f64,
    weighted_ess: f64,
    combined_ess: f64,
    n_members: usize,
    n_restricted: usize,
    clipped: usize,
}

fn survival_statistic(
    records: &[&ObservedRecord],
    spec: &EstimandSpec,
    covariates: &[String],
) -> Result<SurvivalPoint> {
    // Landmark restriction happens inside the statistic so that bootstrap
    // resamples reflect its sampling variability.
    let restricted_storage;
    let working: Vec<&ObservedRecord> = match spec.landmark {
        Some(landmark) => {
            let owned: Vec<ObservedRecord> = records.iter().map(|r| (*r).clone()).collect();
            restricted_storage = landmark_restriction(&owned, landmark)?;
            restricted_storage.records.iter().collect()
        }
        None => {
            for r in records {
                if r.s.is_none() {
                    return Err(Error::invalid(format!(
                        "record '{}' has no observed intercurrent status",
                        r.id
                    )));
                }
            }
            records.to_vec()
        }
    };

    let (defining_arm, defining_value) = resolve_defining_status(&spec.stratum)?;
    let (control, test) = util::split_arms(&working);
    util::require_nonempty_arms(&control, &test)?;
    let (defining, other) = match defining_arm {
        Arm::Test => (&test, &control),
        Arm::Control => (&control, &test),
    };

    let schema = CovariateSchema::infer(working.iter().map(|r| &r.x))?;
    let model = fit_status_propensity(&schema, defining, covariates)?;

    let mut member_times = Vec::new();
    let mut member_events = Vec::new();
    for r in defining.iter() {
        if util::observed_status(r)? == defining_value {
            let (t, e) = r.y.time_event()?;
            member_times.push(t);
            member_events.push(e);
        }
    }
    if member_times.is_empty() {
        return Err(Error::StratumEmptyOnArm {
            arm: defining_arm.label(),
        });
    }
    let member_weights = vec![1.0; member_times.len()];
    let member_curve = weighted_km(&member_times, &member_events, &member_weights)?;

    let other_design = DesignMatrix::build(&schema, other, covariates)?;
    let mut other_times = Vec::with_capacity(other.len());
    let mut other_events = Vec::with_capacity(other.len());
    let mut other_weights = Vec::with_capacity(other.len());
    let mut clipped = 0usize;
    for (r, row) in other.iter().zip(&other_design.rows) {
        let (t, e) = r.y.time_event()?;
        let (p, was_clipped) = model.predict_clipped(row);
        if was_clipped {
            clipped += 1;
        }
        other_times.push(t);
        other_events.push(e);
        other_weights.push(if defining_value { p } else { 1.0 - p });
    }
    let other_curve = weighted_km(&other_times, &other_events, &other_weights)?;

    let (test_curve, control_curve) = match defining_arm {
        Arm::Test => (&member_curve, &other_curve),
        Arm::Control => (&other_curve, &member_curve),
    };
    let estimate = match spec.contrast {
        crate::core::Contrast::SurvivalDifferenceAt { t_star } => {
            survival_diff_at(test_curve, control_curve, t_star)?
        }
        crate::core::Contrast::RmstDifference { t_star } => {
            rmst_diff(test_curve, control_curve, t_star)?
        }
        _ => {
            return Err(Error::invalid(
                "stratum_survival_contrast needs a survival contrast",
            ))
        }
    };

    let mut combined = member_weights;
    combined.extend_from_slice(&other_weights);
    Ok(SurvivalPoint {
        estimate,
        weighted_ess: util::effective_sample_size(&other_weights),
        combined_ess: util::effective_sample_size(&combined),
        n_members: member_times.len(),
        n_restricted: working.len(),
        clipped,
    })
}

/// Survival or RMST contrast in a stratum defined by one arm's status, by
/// propensity weighting under principal ignorability.
///
/// The defining arm's members enter with unit weights; every record of the
/// other arm is weighted by its fitted membership probability. When the
/// estimand carries a landmark, both arms are first conditioned on follow-up
/// beyond it; bootstrap resamples are drawn before the restriction.
pub fn stratum_survival_contrast(
    records: &[ObservedRecord],
    spec: &EstimandSpec,
    covariates: &[String],
    bootstrap: &BootstrapConfig,
) -> Result<EstimateResult> {
    let refs = util::as_refs(records);
    let refs = util::sorted_refs(&refs);
    let kind = check_uniform_outcome_kind(&refs)?;
    if kind != OutcomeKind::TimeToEvent {
        return Err(Error::invalid(format!(
            "stratum_survival_contrast requires time-to-event outcomes, got {kind}"
        )));
    }
    spec.validate_for(kind)?;

    let point = survival_statistic(&refs, spec, covariates)?;
    let ci = bootstrap_ci(
        |r| survival_statistic(r, spec, covariates).map(|p| p.estimate),
        &refs,
        bootstrap,
    )?;

    let mut result = EstimateResult::new(
        "stratum_survival_pi_weighting",
        point.estimate,
        point.combined_ess,
    )
    .with_ci(ci.lower, ci.upper)
    .with_diag("weighted_arm_ess", point.weighted_ess)
    .with_diag("stratum_members_on_defining_arm", point.n_members)
    .with_diag("records_after_landmark", point.n_restricted)
    .with_diag("clipped_weights", point.clipped)
    .with_diag("bootstrap_replicates", ci.used)
    .with_diag("bootstrap_failures", ci.failures);
    if let Some(landmark) = spec.landmark {
        result = result.with_diag("landmark", landmark);
    }
    Ok(result)
}
