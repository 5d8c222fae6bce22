//! Estimators under principal ignorability: propensity weighting,
//! standardization, and multiple imputation of the unobserved status.
//!
//! All three share one identification idea: membership in a stratum defined
//! by one arm's status is observable on that (defining) arm, and conditional
//! on covariates the other arm's outcome carries no further information about
//! membership. The defining arm contributes its members directly; the other
//! arm is reweighted, standardized, or imputed into the stratum.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::collections::BTreeMap;

use crate::core::{
    check_uniform_outcome_kind, Arm, CovariateSchema, EstimandSpec, EstimateResult,
    ObservedRecord, StratumSet,
};
use crate::error::{Error, Result};
use crate::estimators::bootstrap::{bootstrap_ci, BootstrapConfig};
use crate::estimators::glm::{fit_logistic, DesignMatrix, PropensityModel};
use crate::rng::{derive_seed, substream, PURPOSE_IMPUTATION};
use crate::util;

const Z_975: f64 = 1.959963984540054;
const ESS_WARNING_THRESHOLD: f64 = 10.0;

/// The arm whose observed status defines the stratum, and the defining value.
pub(crate) fn resolve_defining_status(stratum: &StratumSet) -> Result<(Arm, bool)> {
    stratum.defining_status().ok_or_else(|| {
        Error::invalid(format!(
            "principal-ignorability estimators need a stratum defined by one arm's status, got '{stratum}'"
        ))
    })
}

fn validate_mean_contrast(records: &[&ObservedRecord], spec: &EstimandSpec) -> Result<()> {
    if spec.contrast.is_survival() {
        return Err(Error::invalid(
            "survival contrasts are computed by stratum_survival_contrast",
        ));
    }
    spec.validate_for(check_uniform_outcome_kind(records)?)
}

/// Fits the status propensity `P(S=1 | X)` on the defining arm.
pub(crate) fn fit_status_propensity(
    schema: &CovariateSchema,
    defining: &[&ObservedRecord],
    covariates: &[String],
) -> Result<PropensityModel> {
    let design = DesignMatrix::build(schema, defining, covariates)?;
    let mut labels = Vec::with_capacity(defining.len());
    for r in defining {
        labels.push(f64::from(u8::from(util::observed_status(r)?)));
    }
    let mut model = fit_logistic(&design, &labels, None)?;
    model.fitted_on = defining
        .first()
        .map(|r| r.z.label().to_string())
        .unwrap_or_default();
    Ok(model)
}

pub(crate) struct WeightingPoint {
    pub estimate: f64,
    pub weighted_ess: f64,
    pub combined_ess: f64,
    pub n_members: usize,
    pub clipped: usize,
    pub propensity_iterations: usize,
    pub propensity_converged: bool,
}

/// One evaluation of the weighting estimator. `tilt` perturbs the membership
/// weights on the weighted arm by `expit(logit(w) + beta * y~)`, where `y~`
/// is the subject's own observed outcome (standardized per weighted-arm SD
/// for continuous outcomes); `None` leaves the fitted weights untouched.
pub(crate) fn weighting_statistic(
    records: &[&ObservedRecord],
    spec: &EstimandSpec,
    covariates: &[String],
    tilt: Option<f64>,
) -> Result<WeightingPoint> {
    let (defining_arm, defining_value) = resolve_defining_status(&spec.stratum)?;
    let (control, test) = util::split_arms(records);
    util::require_nonempty_arms(&control, &test)?;
    let (defining, other) = match defining_arm {
        Arm::Test => (&test, &control),
        Arm::Control => (&control, &test),
    };

    let schema = CovariateSchema::infer(records.iter().map(|r| &r.x))?;
    let model = fit_status_propensity(&schema, defining, covariates)?;

    let mut members = Vec::new();
    for r in defining.iter() {
        if util::observed_status(r)? == defining_value {
            members.push(*r);
        }
    }
    if members.is_empty() {
        return Err(Error::StratumEmptyOnArm {
            arm: defining_arm.label(),
        });
    }
    let identified_mean = util::mean(&util::numeric_outcomes(&members)?);

    let other_design = DesignMatrix::build(&schema, other, covariates)?;
    let other_values = util::numeric_outcomes(other)?;
    let mut clipped = 0usize;
    let mut weights = Vec::with_capacity(other.len());
    for row in &other_design.rows {
        let (p, was_clipped) = model.predict_clipped(row);
        if was_clipped {
            clipped += 1;
        }
        weights.push(if defining_value { p } else { 1.0 - p });
    }
    if let Some(beta) = tilt {
        let (center, scale) = tilt_standardization(records, other, &other_values)?;
        for (w, y) in weights.iter_mut().zip(&other_values) {
            *w = util::expit(util::logit(*w) + beta * (y - center) / scale);
        }
    }

    let weighted_mean = util::weighted_mean(&other_values, &weights)?;
    let weighted_ess = util::effective_sample_size(&weights);
    let mut combined: Vec<f64> = vec![1.0; members.len()];
    combined.extend_from_slice(&weights);
    let combined_ess = util::effective_sample_size(&combined);

    let (test_component, control_component) = match defining_arm {
        Arm::Test => (identified_mean, weighted_mean),
        Arm::Control => (weighted_mean, identified_mean),
    };
    let estimate = spec.contrast.combine(test_component, control_component)?;

    Ok(WeightingPoint {
        estimate,
        weighted_ess,
        combined_ess,
        n_members: members.len(),
        clipped,
        propensity_iterations: model.iterations,
        propensity_converged: model.converged,
    })
}

/// Standardization scale for the tipping tilt: binary outcomes are tilted on
/// their raw 0/1 value, continuous outcomes per weighted-arm SD.
fn tilt_standardization(
    all_records: &[&ObservedRecord],
    weighted_arm: &[&ObservedRecord],
    weighted_values: &[f64],
) -> Result<(f64, f64)> {
    match check_uniform_outcome_kind(all_records)? {
        crate::core::OutcomeKind::Binary => Ok((0.0, 1.0)),
        crate::core::OutcomeKind::Continuous => {
            let center = util::mean(weighted_values);
            let sd = util::sample_sd(weighted_values);
            if sd <= 0.0 || weighted_arm.len() < 2 {
                return Err(Error::invalid(
                    "tilt standardization needs outcome variation on the weighted arm",
                ));
            }
            Ok((center, sd))
        }
        crate::core::OutcomeKind::TimeToEvent => Err(Error::invalid(
            "tilted weighting applies to binary or continuous outcomes",
        )),
    }
}

/// Propensity weighting: the defining arm contributes its stratum members
/// unweighted; every record of the other arm is weighted by its fitted
/// membership probability. The bootstrap refits the propensity per resample.
pub fn pi_weighting(
    records: &[ObservedRecord],
    spec: &EstimandSpec,
    covariates: &[String],
    bootstrap: &BootstrapConfig,
) -> Result<EstimateResult> {
    let refs = util::as_refs(records);
    let refs = util::sorted_refs(&refs);
    validate_mean_contrast(&refs, spec)?;

    let point = weighting_statistic(&refs, spec, covariates, None)?;
    let ci = bootstrap_ci(
        |r| weighting_statistic(r, spec, covariates, None).map(|p| p.estimate),
        &refs,
        bootstrap,
    )?;

    let mut result = EstimateResult::new("pi_weighting", point.estimate, point.combined_ess)
        .with_ci(ci.lower, ci.upper)
        .with_diag("weighted_arm_ess", point.weighted_ess)
        .with_diag("stratum_members_on_defining_arm", point.n_members)
        .with_diag("clipped_weights", point.clipped)
        .with_diag("propensity_converged", point.propensity_converged)
        .with_diag("propensity_iterations", point.propensity_iterations)
        .with_diag("bootstrap_replicates", ci.used)
        .with_diag("bootstrap_failures", ci.failures);
    if point.weighted_ess < ESS_WARNING_THRESHOLD {
        result = result.with_diag(
            "warning",
            format!(
                "effective sample size of the weighted arm is {:.2} (< {ESS_WARNING_THRESHOLD})",
                point.weighted_ess
            ),
        );
    }
    Ok(result)
}

fn cell_key(record: &ObservedRecord, covariates: &[String]) -> Result<String> {
    let mut parts = Vec::with_capacity(covariates.len());
    for name in covariates {
        let value = record.x.get(name).ok_or_else(|| {
            Error::invalid(format!("record '{}' is missing covariate '{name}'", record.id))
        })?;
        parts.push(format!("{name}={value}"));
    }
    Ok(parts.join(";"))
}

struct StandardizationPoint {
    estimate: f64,
    other_ess: f64,
    n_members: usize,
    cells: usize,
}

fn standardization_statistic(
    records: &[&ObservedRecord],
    spec: &EstimandSpec,
    covariates: &[String],
) -> Result<StandardizationPoint> {
    let (defining_arm, defining_value) = resolve_defining_status(&spec.stratum)?;
    let (control, test) = util::split_arms(records);
    util::require_nonempty_arms(&control, &test)?;
    let (defining, other) = match defining_arm {
        Arm::Test => (&test, &control),
        Arm::Control => (&control, &test),
    };

    // Covariate-cell distribution among defining-arm stratum members.
    let mut member_cells: BTreeMap<String, usize> = BTreeMap::new();
    let mut member_values = Vec::new();
    for r in defining.iter() {
        if util::observed_status(r)? == defining_value {
            *member_cells.entry(cell_key(r, covariates)?).or_insert(0) += 1;
            member_values.push(r.y.numeric_value()?);
        }
    }
    if member_values.is_empty() {
        return Err(Error::StratumEmptyOnArm {
            arm: defining_arm.label(),
        });
    }
    let n_members = member_values.len();

    let mut other_cells: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in other.iter() {
        other_cells
            .entry(cell_key(r, covariates)?)
            .or_default()
            .push(r.y.numeric_value()?);
    }

    // Cell means on the other arm, averaged with member-cell weights. The
    // implied per-record weights are kept for the effective sample size.
    let mut standardized = 0.0;
    let mut implied_weights = Vec::new();
    for (cell, count) in &member_cells {
        let share = *count as f64 / n_members as f64;
        let values = other_cells
            .get(cell)
            .ok_or_else(|| Error::PositivityViolated { cell: cell.clone() })?;
        standardized += share * util::mean(values);
        implied_weights.extend(values.iter().map(|_| share / values.len() as f64));
    }
    for (cell, values) in &other_cells {
        if !member_cells.contains_key(cell) {
            implied_weights.extend(values.iter().map(|_| 0.0));
        }
    }

    let identified_mean = util::mean(&member_values);
    let (test_component, control_component) = match defining_arm {
        Arm::Test => (identified_mean, standardized),
        Arm::Control => (standardized, identified_mean),
    };
    let estimate = spec.contrast.combine(test_component, control_component)?;
    Ok(StandardizationPoint {
        estimate,
        other_ess: util::effective_sample_size(&implied_weights),
        n_members,
        cells: member_cells.len(),
    })
}

/// Standardization over categorical covariate cells: other-arm cell means
/// averaged with the cell distribution of the defining arm's stratum members.
/// Continuous covariates must be pre-binned by the caller.
pub fn pi_standardization(
    records: &[ObservedRecord],
    spec: &EstimandSpec,
    covariates: &[String],
    bootstrap: &BootstrapConfig,
) -> Result<EstimateResult> {
    let refs = util::as_refs(records);
    let refs = util::sorted_refs(&refs);
    validate_mean_contrast(&refs, spec)?;

    let schema = CovariateSchema::infer(refs.iter().map(|r| &r.x))?;
    for name in covariates {
        match schema.column(name) {
            None => return Err(Error::invalid(format!("unknown covariate '{name}'"))),
            Some(col) => {
                if matches!(col.kind, crate::core::ColumnKind::Continuous) {
                    return Err(Error::invalid(format!(
                        "standardization requires categorical covariates; '{name}' is continuous"
                    )));
                }
            }
        }
    }

    let point = standardization_statistic(&refs, spec, covariates)?;
    let ci = bootstrap_ci(
        |r| standardization_statistic(r, spec, covariates).map(|p| p.estimate),
        &refs,
        bootstrap,
    )?;

    Ok(
        EstimateResult::new(
            "pi_standardization",
            point.estimate,
            point.n_members as f64 + point.other_ess,
        )
        .with_ci(ci.lower, ci.upper)
        .with_diag("covariate_cells", point.cells)
        .with_diag("stratum_members_on_defining_arm", point.n_members)
        .with_diag("bootstrap_replicates", ci.used)
        .with_diag("bootstrap_failures", ci.failures),
    )
}

/// Multiple imputation of the defining arm's status for the other arm's
/// records, pooled by Rubin's rules.
///
/// Each imputation draws propensity coefficients from their asymptotic normal
/// law, imputes membership per record, and computes the contrast treating the
/// imputed status as known. The pooled interval uses normal quantiles on
/// `within + (1 + 1/m) * between` variance.
pub fn pi_multiple_imputation(
    records: &[ObservedRecord],
    spec: &EstimandSpec,
    covariates: &[String],
    imputations: usize,
    seed: u64,
) -> Result<EstimateResult> {
    let refs = util::as_refs(records);
    let refs = util::sorted_refs(&refs);
    validate_mean_contrast(&refs, spec)?;
    let (defining_arm, _) = resolve_defining_status(&spec.stratum)?;
    let (control, test) = util::split_arms(&refs);
    util::require_nonempty_arms(&control, &test)?;
    let defining = match defining_arm {
        Arm::Test => &test,
        Arm::Control => &control,
    };
    let schema = CovariateSchema::infer(refs.iter().map(|r| &r.x))?;
    let model = fit_status_propensity(&schema, defining, covariates)?;
    pi_multiple_imputation_with_model(records, spec, covariates, &model, imputations, seed)
}

/// As [`pi_multiple_imputation`], with a caller-supplied propensity model.
pub fn pi_multiple_imputation_with_model(
    records: &[ObservedRecord],
    spec: &EstimandSpec,
    covariates: &[String],
    model: &PropensityModel,
    imputations: usize,
    seed: u64,
) -> Result<EstimateResult> {
    if imputations < 2 {
        return Err(Error::invalid(
            "multiple imputation needs m >= 2; the between-imputation variance is undefined otherwise",
        ));
    }
    let refs = util::as_refs(records);
    let refs = util::sorted_refs(&refs);
    validate_mean_contrast(&refs, spec)?;
    let (defining_arm, defining_value) = resolve_defining_status(&spec.stratum)?;
    let (control, test) = util::split_arms(&refs);
    util::require_nonempty_arms(&control, &test)?;
    let (defining, other) = match defining_arm {
        Arm::Test => (&test, &control),
        Arm::Control => (&control, &test),
    };

    let mut member_values = Vec::new();
    for r in defining.iter() {
        if util::observed_status(r)? == defining_value {
            member_values.push(r.y.numeric_value()?);
        }
    }
    if member_values.is_empty() {
        return Err(Error::StratumEmptyOnArm {
            arm: defining_arm.label(),
        });
    }
    let identified_mean = util::mean(&member_values);
    let identified_var = util::sample_variance(&member_values) / member_values.len() as f64;

    let schema = CovariateSchema::infer(refs.iter().map(|r| &r.x))?;
    let other_design = DesignMatrix::build(&schema, other, covariates)?;
    let other_values = util::numeric_outcomes(other)?;

    // Cholesky factor of the coefficient covariance (jittered so that a
    // degenerate, e.g. injected, covariance still factors).
    let p = model.coefficients.len();
    let mut cov = DMatrix::from_fn(p, p, |i, j| model.covariance[i][j]);
    for i in 0..p {
        cov[(i, i)] += 1e-12;
    }
    let chol = cov.cholesky().ok_or(Error::SingularDesign)?;
    let l = chol.l();
    let beta_hat = DVector::from_iterator(p, model.coefficients.iter().copied());

    let imputation_seed = derive_seed(seed, PURPOSE_IMPUTATION);
    let mut estimates = Vec::with_capacity(imputations);
    let mut within = Vec::with_capacity(imputations);
    let mut member_counts = Vec::with_capacity(imputations);
    let mut failures = 0usize;

    for j in 0..imputations {
        let mut rng = substream(imputation_seed, j as u64);
        let z = DVector::from_iterator(p, (0..p).map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        }));
        let beta = &beta_hat + &l * z;

        let mut imputed_values = Vec::new();
        for (row, y) in other_design.rows.iter().zip(&other_values) {
            let eta: f64 = row.iter().zip(beta.iter()).map(|(x, b)| x * b).sum();
            let status = rng.random_bool(util::expit(eta).clamp(0.0, 1.0));
            if status == defining_value {
                imputed_values.push(*y);
            }
        }
        if imputed_values.is_empty() {
            failures += 1;
            continue;
        }
        let other_mean = util::mean(&imputed_values);
        let other_var = util::sample_variance(&imputed_values) / imputed_values.len() as f64;
        let (test_component, control_component, test_var, control_var) = match defining_arm {
            Arm::Test => (identified_mean, other_mean, identified_var, other_var),
            Arm::Control => (other_mean, identified_mean, other_var, identified_var),
        };
        let estimate = spec.contrast.combine(test_component, control_component)?;
        let variance = if spec.contrast.is_ratio() {
            // Delta method for t/c.
            test_var / (control_component * control_component)
                + control_var * (test_component * test_component)
                    / control_component.powi(4)
        } else {
            test_var + control_var
        };
        estimates.push(estimate);
        within.push(variance);
        member_counts.push(imputed_values.len());
    }

    if estimates.len() < 2 {
        return Err(Error::invalid(format!(
            "only {} of {imputations} imputations produced a nonempty stratum",
            estimates.len()
        )));
    }

    let m = estimates.len() as f64;
    let pooled = util::mean(&estimates);
    let between = util::sample_variance(&estimates);
    let within_mean = util::mean(&within);
    let total_variance = within_mean + (1.0 + 1.0 / m) * between;
    let half_width = Z_975 * total_variance.sqrt();
    let mean_members = util::mean(&member_counts.iter().map(|c| *c as f64).collect::<Vec<_>>());

    Ok(EstimateResult::new(
        "pi_multiple_imputation",
        pooled,
        member_values.len() as f64 + mean_members,
    )
    .with_ci(pooled - half_width, pooled + half_width)
    .with_diag("imputations", estimates.len())
    .with_diag("imputations_failed", failures)
    .with_diag("between_variance", between)
    .with_diag("within_variance", within_mean)
    .with_diag("mean_imputed_members", mean_members)
    .with_diag("pooling", "rubin: within + (1 + 1/m) * between, normal quantiles"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{Contrast, CovariateValue, CovariateVector, Outcome};

    fn record(id: &str, z: Arm, s: Option<bool>, y: f64, site: &str) -> ObservedRecord {
        let mut x = CovariateVector::empty();
        x.push("site", CovariateValue::Categorical(site.into())).unwrap();
        ObservedRecord {
            id: id.to_string(),
            z,
            s,
            y: Outcome::binary(y == 1.0),
            x,
        }
    }

    fn spec() -> EstimandSpec {
        EstimandSpec::new(
            StratumSet::with_status(Arm::Test, true),
            Contrast::RiskDifference,
        )
    }

    fn boot() -> BootstrapConfig {
        BootstrapConfig::new(150, 21)
    }

    /// Mixed fixture: 8 treated (5 with S=1), 8 controls across two sites.
    fn fixture() -> Vec<ObservedRecord> {
        let mut out = Vec::new();
        let treated = [
            (true, 1.0, "a"),
            (true, 1.0, "a"),
            (true, 0.0, "b"),
            (true, 1.0, "b"),
            (true, 0.0, "a"),
            (false, 0.0, "b"),
            (false, 1.0, "b"),
            (false, 0.0, "a"),
        ];
        for (i, (s, y, site)) in treated.iter().enumerate() {
            out.push(record(&format!("t{i}"), Arm::Test, Some(*s), *y, site));
        }
        let controls = [
            (1.0, "a"),
            (0.0, "a"),
            (0.0, "a"),
            (1.0, "b"),
            (1.0, "b"),
            (0.0, "b"),
            (0.0, "b"),
            (1.0, "a"),
        ];
        for (i, (y, site)) in controls.iter().enumerate() {
            out.push(record(&format!("c{i}"), Arm::Control, None, *y, site));
        }
        out
    }

    #[test]
    fn intercept_only_weighting_is_a_two_mean_contrast() {
        // Constant weights must cancel exactly: the estimate equals the
        // treated-members mean minus the plain control mean.
        let records = fixture();
        let result = pi_weighting(&records, &spec(), &[], &boot()).unwrap();
        let expected = 3.0 / 5.0 - 4.0 / 8.0;
        assert_eq!(result.estimate, expected);
        assert_eq!(result.diagnostics["weighted_arm_ess"], serde_json::json!(8.0));
    }

    #[test]
    fn standardization_with_one_cell_matches_intercept_weighting() {
        let records: Vec<ObservedRecord> = fixture()
            .into_iter()
            .map(|mut r| {
                let mut x = CovariateVector::empty();
                x.push("site", CovariateValue::Categorical("all".into())).unwrap();
                r.x = x;
                r
            })
            .collect();
        let weighting = pi_weighting(&records, &spec(), &[], &boot()).unwrap();
        let standardization =
            pi_standardization(&records, &spec(), &["site".into()], &boot()).unwrap();
        assert_eq!(weighting.estimate, standardization.estimate);
    }

    #[test]
    fn equal_cell_means_make_weights_irrelevant() {
        // Both cells have control mean 0.5, so any member-cell distribution
        // standardizes to 0.5.
        let records = fixture();
        let result = pi_standardization(&records, &spec(), &["site".into()], &boot()).unwrap();
        let members_mean = 3.0 / 5.0;
        assert!((result.estimate - (members_mean - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn positivity_violation_is_reported_with_the_cell() {
        let mut records = fixture();
        // Remove every control in site b.
        records.retain(|r| !(r.z == Arm::Control && matches!(r.x.get("site"), Some(CovariateValue::Categorical(s)) if s == "b")));
        let err = pi_standardization(&records, &spec(), &["site".into()], &boot()).unwrap_err();
        assert_eq!(err.to_string(), "positivity violated in cell site=b");
    }

    #[test]
    fn continuous_covariates_are_rejected_for_standardization() {
        let mut records = fixture();
        for (i, r) in records.iter_mut().enumerate() {
            let mut x = CovariateVector::empty();
            x.push("age", CovariateValue::Continuous(40.0 + i as f64)).unwrap();
            r.x = x;
        }
        let err = pi_standardization(&records, &spec(), &["age".into()], &boot()).unwrap_err();
        assert!(err.to_string().contains("categorical"));
    }

    #[test]
    fn degenerate_certain_membership_reduces_mi_to_weighting() {
        // An injected model with a huge intercept makes every control a
        // member in every imputation; the pooled estimate then equals the
        // constant-weight estimate and the between-variance is zero.
        let records = fixture();
        let model = PropensityModel {
            coefficients: vec![40.0],
            column_names: vec!["(intercept)".into()],
            fitted_on: "treated".into(),
            converged: true,
            iterations: 1,
            covariance: vec![vec![0.0]],
        };
        let result =
            pi_multiple_imputation_with_model(&records, &spec(), &[], &model, 10, 5).unwrap();
        let expected = 3.0 / 5.0 - 4.0 / 8.0;
        assert_eq!(result.estimate, expected);
        assert_eq!(result.diagnostics["between_variance"], serde_json::json!(0.0));
        assert_eq!(result.diagnostics["imputations_failed"], serde_json::json!(0));
    }

    #[test]
    fn mi_needs_at_least_two_imputations() {
        let records = fixture();
        let err = pi_multiple_imputation(&records, &spec(), &[], 1, 5).unwrap_err();
        assert!(err.to_string().contains("m >= 2"));
    }

    #[test]
    fn between_variance_is_nonnegative() {
        let records = fixture();
        let result = pi_multiple_imputation(&records, &spec(), &[], 25, 11).unwrap();
        let between = result.diagnostics["between_variance"].as_f64().unwrap();
        assert!(between >= 0.0);
    }

    #[test]
    fn weighting_is_deterministic_given_seed_and_sorted_input() {
        let records = fixture();
        let a = pi_weighting(&records, &spec(), &[], &boot()).unwrap();
        let mut reversed = records.clone();
        reversed.reverse();
        let b = pi_weighting(&reversed, &spec(), &[], &boot()).unwrap();
        assert_eq!(a, b);
    }
}
