//! Joint mixture model over principal strata, fitted by EM.
//!
//! Each subject's likelihood sums over the stratum cells compatible with the
//! observed `(z, s)` pair: a multinomial-logistic membership model in the
//! covariates times an outcome density per (cell, arm). The E-step computes
//! posterior cell probabilities, the M-step refits both parts against them.
//! A monotonicity constraint removes one cell from the model entirely.
//!
//! No bootstrap interval is offered for this estimator: mixture likelihoods
//! are exactly the setting where resampling inference is unreliable, so the
//! result carries multi-start stability diagnostics instead.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::core::{
    check_uniform_outcome_kind, Arm, CovariateSchema, EstimandSpec, EstimateResult,
    MonotonicityDirection, ObservedRecord, OutcomeKind, PrincipalStratum,
};
use crate::error::{Error, Result};
use crate::estimators::glm::{fit_multinomial_soft, DesignMatrix, SoftMultinomial};
use crate::rng::{derive_seed, substream, PURPOSE_EM};
use crate::util;

const LOG_2PI: f64 = 1.8378770664093453;
const SD_FLOOR: f64 = 1e-6;
const PROB_FLOOR: f64 = 1e-12;
const TARGET_PROPORTION_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    /// Number of random restarts; the best final log-likelihood wins.
    pub restarts: usize,
    pub seed: u64,
    /// Optional monotonicity direction; removes the excluded cell.
    pub monotonicity: Option<MonotonicityDirection>,
    pub max_iter: usize,
    /// Relative log-likelihood change declaring convergence.
    pub tol: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            restarts: 10,
            seed: 0,
            monotonicity: None,
            max_iter: 500,
            tol: 1e-8,
        }
    }
}

/// Outcome parameters of one (cell, arm) mixture component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ComponentParams {
    Bernoulli { p: f64 },
    Normal { mean: f64, sd: f64 },
}

impl ComponentParams {
    fn mean(&self) -> f64 {
        match self {
            ComponentParams::Bernoulli { p } => *p,
            ComponentParams::Normal { mean, .. } => *mean,
        }
    }

    fn log_density(&self, y: f64) -> f64 {
        match self {
            ComponentParams::Bernoulli { p } => {
                if y == 1.0 {
                    p.ln()
                } else {
                    (1.0 - p).ln()
                }
            }
            ComponentParams::Normal { mean, sd } => {
                let z = (y - mean) / sd;
                -0.5 * LOG_2PI - sd.ln() - 0.5 * z * z
            }
        }
    }
}

/// Fitted mixture: membership model, per-component outcome parameters,
/// likelihood trace, and per-subject posterior cell probabilities.
#[derive(Debug, Clone)]
pub struct MixtureFit {
    /// Admissible cells in canonical order; the membership model's reference
    /// category is the last one.
    pub cells: Vec<PrincipalStratum>,
    pub membership: SoftMultinomial,
    pub membership_columns: Vec<String>,
    /// Outcome parameters indexed as `params[cell_position][arm index]`,
    /// aligned with `cells`.
    pub outcome_params: Vec<[ComponentParams; 2]>,
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Posterior cell probabilities per subject (full four-cell layout,
    /// zeros on inadmissible cells), aligned to records sorted by id.
    pub posteriors: Vec<[f64; 4]>,
    /// Model-implied cell proportions averaged over subjects (full layout).
    pub fitted_proportions: [f64; 4],
    /// Which restart produced this fit.
    pub restart: usize,
    /// (cell, arm) components that never received posterior weight and kept
    /// their initial parameters.
    pub unidentified_components: usize,
}

/// Subjects with their precomputed design rows, outcome values, and
/// admissible cell sets.
struct Prepared {
    rows: Vec<Vec<f64>>,
    values: Vec<f64>,
    arms: Vec<Arm>,
    admissible: Vec<Vec<usize>>,
    cells: Vec<PrincipalStratum>,
    kind: OutcomeKind,
    columns: Vec<String>,
}

fn prepare(
    records: &[&ObservedRecord],
    covariates: &[String],
    monotonicity: Option<MonotonicityDirection>,
) -> Result<Prepared> {
    let kind = check_uniform_outcome_kind(records)?;
    if kind == OutcomeKind::TimeToEvent {
        return Err(Error::invalid(
            "the mixture model supports binary and continuous (normal) outcomes",
        ));
    }
    let excluded = monotonicity.map(|m| m.excluded_cell());
    let cells: Vec<PrincipalStratum> = PrincipalStratum::ALL
        .into_iter()
        .filter(|c| Some(*c) != excluded)
        .collect();

    let schema = CovariateSchema::infer(records.iter().map(|r| &r.x))?;
    let design = DesignMatrix::build(&schema, records, covariates)?;
    let mut values = Vec::with_capacity(records.len());
    let mut arms = Vec::with_capacity(records.len());
    let mut admissible = Vec::with_capacity(records.len());
    for r in records {
        values.push(r.y.numeric_value()?);
        arms.push(r.z);
        let compatible: Vec<usize> = cells
            .iter()
            .enumerate()
            .filter(|(_, cell)| match r.s {
                None => true,
                Some(s) => cell.status_under(r.z) == s,
            })
            .map(|(k, _)| k)
            .collect();
        if compatible.is_empty() {
            return Err(Error::invalid(format!(
                "record '{}' is incompatible with every admissible cell under the constraint",
                r.id
            )));
        }
        admissible.push(compatible);
    }
    Ok(Prepared {
        rows: design.rows,
        values,
        arms,
        admissible,
        cells,
        kind,
        columns: design.column_names,
    })
}

struct RestartOutcome {
    membership: SoftMultinomial,
    params: Vec<[ComponentParams; 2]>,
    trace: Vec<f64>,
    converged: bool,
    iterations: usize,
    posteriors: Vec<Vec<f64>>,
    unidentified: usize,
}

/// Weighted ML update of one component, keeping the previous parameters when
/// the component receives no weight.
fn update_component(
    kind: OutcomeKind,
    values: &[f64],
    weights: &[f64],
    previous: ComponentParams,
) -> (ComponentParams, bool) {
    let total: f64 = weights.iter().sum();
    if total <= 1e-300 {
        return (previous, false);
    }
    let mean = values
        .iter()
        .zip(weights)
        .map(|(y, w)| y * w)
        .sum::<f64>()
        / total;
    match kind {
        OutcomeKind::Binary => (
            ComponentParams::Bernoulli {
                p: mean.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR),
            },
            true,
        ),
        OutcomeKind::Continuous => {
            let var = values
                .iter()
                .zip(weights)
                .map(|(y, w)| w * (y - mean) * (y - mean))
                .sum::<f64>()
                / total;
            (
                ComponentParams::Normal {
                    mean,
                    sd: var.sqrt().max(SD_FLOOR),
                },
                true,
            )
        }
        OutcomeKind::TimeToEvent => unreachable!("rejected in prepare"),
    }
}

fn run_restart(prepared: &Prepared, restart: usize, seed: u64, options: &EmOptions) -> Result<RestartOutcome> {
    let n = prepared.rows.len();
    let k = prepared.cells.len();
    let mut rng = substream(seed, restart as u64);

    // Random soft responsibilities over each subject's admissible cells.
    let mut posterior: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut q = vec![0.0; k];
            let mut total = 0.0;
            for &cell in &prepared.admissible[i] {
                let draw: f64 = rng.random::<f64>() + 0.25;
                q[cell] = draw;
                total += draw;
            }
            for v in &mut q {
                *v /= total;
            }
            q
        })
        .collect();

    let mut membership: Option<SoftMultinomial> = None;
    let mut params: Vec<[ComponentParams; 2]> = vec![
        [match prepared.kind {
            OutcomeKind::Binary => ComponentParams::Bernoulli { p: 0.5 },
            _ => ComponentParams::Normal {
                mean: util::mean(&prepared.values),
                sd: util::sample_sd(&prepared.values).max(SD_FLOOR),
            },
        }; 2];
        k
    ];
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut unidentified = 0;

    for iter in 1..=options.max_iter {
        iterations = iter;

        // M-step against the current responsibilities.
        let fitted = fit_multinomial_soft(
            &prepared.rows,
            &posterior,
            k,
            membership.as_ref(),
            50,
            1e-9,
        )?;
        unidentified = 0;
        for (cell_idx, cell_params) in params.iter_mut().enumerate() {
            for (arm_idx, arm) in Arm::BOTH.iter().enumerate() {
                let mut values = Vec::new();
                let mut weights = Vec::new();
                for i in 0..n {
                    if prepared.arms[i] == *arm {
                        values.push(prepared.values[i]);
                        weights.push(posterior[i][cell_idx]);
                    }
                }
                let (updated, identified) = update_component(
                    prepared.kind,
                    &values,
                    &weights,
                    cell_params[arm_idx],
                );
                cell_params[arm_idx] = updated;
                if !identified {
                    unidentified += 1;
                }
            }
        }
        membership = Some(fitted);
        let model = membership.as_ref().unwrap();

        // E-step: posterior responsibilities and the observed log-likelihood.
        let mut loglik = 0.0;
        for i in 0..n {
            let prior = model.probabilities(&prepared.rows[i]);
            let arm_idx = prepared.arms[i].as_binary() as usize;
            let mut joint = vec![0.0; k];
            let mut total = 0.0;
            for &cell in &prepared.admissible[i] {
                let density = params[cell][arm_idx]
                    .log_density(prepared.values[i])
                    .exp();
                let value = prior[cell].max(PROB_FLOOR) * density;
                joint[cell] = value;
                total += value;
            }
            if total <= 0.0 {
                // Degenerate densities: fall back to the prior over the
                // admissible cells.
                for &cell in &prepared.admissible[i] {
                    joint[cell] = prior[cell].max(PROB_FLOOR);
                    total += joint[cell];
                }
            }
            loglik += total.ln();
            for v in &mut joint {
                *v /= total;
            }
            posterior[i] = joint;
        }
        trace.push(loglik);

        if iter >= 2 {
            let previous = trace[iter - 2];
            let rel = (loglik - previous).abs() / previous.abs().max(1.0);
            if rel < options.tol {
                converged = true;
                break;
            }
        }
    }

    Ok(RestartOutcome {
        membership: membership.expect("at least one iteration ran"),
        params,
        trace,
        converged,
        iterations,
        posteriors: posterior,
        unidentified,
    })
}

/// Fits the stratum mixture and derives the target-stratum contrast from the
/// fitted components, weighting union cells by their fitted proportions.
pub fn em_mixture(
    records: &[ObservedRecord],
    spec: &EstimandSpec,
    covariates: &[String],
    options: &EmOptions,
) -> Result<(MixtureFit, EstimateResult)> {
    if options.restarts == 0 {
        return Err(Error::invalid("at least one restart is required"));
    }
    let refs = util::as_refs(records);
    let refs = util::sorted_refs(&refs);
    let (control, test) = util::split_arms(&refs);
    util::require_nonempty_arms(&control, &test)?;
    spec.validate_for(check_uniform_outcome_kind(&refs)?)?;
    if spec.contrast.is_survival() {
        return Err(Error::invalid(
            "the mixture model supports mean and risk contrasts only",
        ));
    }

    let prepared = prepare(&refs, covariates, options.monotonicity)?;
    let seed = derive_seed(options.seed, PURPOSE_EM);

    let outcomes: Vec<Result<RestartOutcome>> = (0..options.restarts)
        .into_par_iter()
        .map(|restart| run_restart(&prepared, restart, seed, options))
        .collect();

    // A restart that errors out (for example a singular inner fit) counts as
    // non-converged; the run fails only when every restart does.
    let mut best: Option<(usize, RestartOutcome)> = None;
    let mut traces = Vec::new();
    let mut final_logliks = Vec::new();
    let mut any_converged = false;
    for (restart, outcome) in outcomes.into_iter().enumerate() {
        let outcome = match outcome {
            Ok(o) => o,
            Err(_) => {
                traces.push(Vec::new());
                continue;
            }
        };
        let final_ll = *outcome.trace.last().expect("nonempty trace");
        traces.push(outcome.trace.clone());
        final_logliks.push(final_ll);
        any_converged |= outcome.converged;
        let better = match &best {
            None => true,
            Some((_, current)) => final_ll > *current.trace.last().unwrap(),
        };
        if better {
            best = Some((restart, outcome));
        }
    }
    if !any_converged {
        return Err(Error::EmNotConverged {
            restarts: options.restarts,
            traces,
        });
    }
    let (restart, best) = best.expect("a converged restart exists");

    // Model-implied cell proportions averaged over subjects.
    let k = prepared.cells.len();
    let mut fitted = vec![0.0; k];
    for row in &prepared.rows {
        let probs = best.membership.probabilities(row);
        for (slot, p) in fitted.iter_mut().zip(&probs) {
            *slot += p;
        }
    }
    for slot in &mut fitted {
        *slot /= prepared.rows.len() as f64;
    }

    let mut fitted_proportions = [0.0; 4];
    for (pos, cell) in prepared.cells.iter().enumerate() {
        fitted_proportions[cell.index()] = fitted[pos];
    }
    let mut posteriors = Vec::with_capacity(best.posteriors.len());
    for q in &best.posteriors {
        let mut full = [0.0; 4];
        for (pos, cell) in prepared.cells.iter().enumerate() {
            full[cell.index()] = q[pos];
        }
        posteriors.push(full);
    }

    let loglik_spread = final_logliks
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
        - final_logliks.iter().copied().fold(f64::INFINITY, f64::min);

    // Target-stratum contrast from the fitted components.
    let target_cells: Vec<usize> = prepared
        .cells
        .iter()
        .enumerate()
        .filter(|(_, c)| spec.stratum.contains(**c))
        .map(|(pos, _)| pos)
        .collect();
    let target_mass: f64 = target_cells.iter().map(|&pos| fitted[pos]).sum();
    if target_cells.is_empty() || target_mass < TARGET_PROPORTION_FLOOR {
        return Err(Error::TargetStratumVanishes {
            proportion: target_mass,
        });
    }
    let component = |arm: Arm| -> f64 {
        target_cells
            .iter()
            .map(|&pos| fitted[pos] * best.params[pos][arm.as_binary() as usize].mean())
            .sum::<f64>()
            / target_mass
    };
    let estimate = spec
        .contrast
        .combine(component(Arm::Test), component(Arm::Control))?;

    let final_ll = *best.trace.last().unwrap();
    let result = EstimateResult::new("em_mixture", estimate, refs.len() as f64)
        .with_diag("converged", best.converged)
        .with_diag("iterations", best.iterations)
        .with_diag("restarts", options.restarts)
        .with_diag("best_restart", restart)
        .with_diag("loglik", final_ll)
        .with_diag("loglik_spread_across_restarts", loglik_spread)
        .with_diag("target_proportion", target_mass)
        .with_diag("unidentified_components", best.unidentified)
        .with_diag("ci", "not offered for mixture likelihoods; see loglik_spread_across_restarts");

    let fit = MixtureFit {
        cells: prepared.cells,
        membership: best.membership,
        membership_columns: prepared.columns,
        outcome_params: best.params,
        loglik_trace: best.trace,
        converged: best.converged,
        iterations: best.iterations,
        posteriors,
        fitted_proportions,
        restart,
        unidentified_components: best.unidentified,
    };
    Ok((fit, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{Contrast, CovariateVector, Outcome, StratumSet};

    fn record(id: &str, z: Arm, s: Option<bool>, y: Outcome) -> ObservedRecord {
        ObservedRecord {
            id: id.to_string(),
            z,
            s,
            y,
            x: CovariateVector::empty(),
        }
    }

    /// Treated all with status 1, controls all with status 0. Under
    /// S(0) >= S(1) the admissible sets collapse to single cells, so
    /// membership is observed outright.
    fn collapsed_fixture() -> Vec<ObservedRecord> {
        let mut out = Vec::new();
        for i in 0..30 {
            let y = Outcome::continuous(2.0 + f64::from(i % 5) * 0.1).unwrap();
            out.push(record(&format!("t{i:02}"), Arm::Test, Some(true), y));
        }
        for i in 0..30 {
            let y = Outcome::continuous(-1.0 - f64::from(i % 5) * 0.1).unwrap();
            out.push(record(&format!("c{i:02}"), Arm::Control, Some(false), y));
        }
        out
    }

    #[test]
    fn collapsed_admissibility_recovers_subgroup_means() {
        let records = collapsed_fixture();
        let spec = EstimandSpec::new(
            StratumSet::single(PrincipalStratum::EventBoth),
            Contrast::MeanDifference,
        );
        let options = EmOptions {
            restarts: 3,
            seed: 4,
            monotonicity: Some(MonotonicityDirection::S0GeS1),
            ..EmOptions::default()
        };
        let (fit, _) = em_mixture(&records, &spec, &[], &options)
            .map(Some)
            .unwrap_or(None)
            .expect("collapsed fit succeeds");

        // Treated records are compatible only with event_both, controls only
        // with event_neither: posteriors are degenerate and the identified
        // component parameters equal the subgroup means.
        let both = PrincipalStratum::EventBoth.index();
        let neither = PrincipalStratum::EventNeither.index();
        for (i, q) in fit.posteriors.iter().enumerate() {
            if i < 30 {
                // ids sort c00..c29 before t00..t29
                assert_eq!(q[neither], 1.0, "control posterior {q:?}");
            } else {
                assert_eq!(q[both], 1.0, "treated posterior {q:?}");
            }
            assert_eq!(q[PrincipalStratum::EventTestOnly.index()], 0.0);
        }

        let treated_mean = 2.0 + 0.1 * (0.0 + 1.0 + 2.0 + 3.0 + 4.0) / 5.0;
        let control_mean = -1.0 - 0.1 * (0.0 + 1.0 + 2.0 + 3.0 + 4.0) / 5.0;
        let both_pos = fit.cells.iter().position(|c| *c == PrincipalStratum::EventBoth).unwrap();
        let neither_pos = fit
            .cells
            .iter()
            .position(|c| *c == PrincipalStratum::EventNeither)
            .unwrap();
        match fit.outcome_params[both_pos][1] {
            ComponentParams::Normal { mean, .. } => assert!((mean - treated_mean).abs() < 1e-9),
            other => panic!("unexpected params {other:?}"),
        }
        match fit.outcome_params[neither_pos][0] {
            ComponentParams::Normal { mean, .. } => assert!((mean - control_mean).abs() < 1e-9),
            other => panic!("unexpected params {other:?}"),
        }
    }

    #[test]
    fn posteriors_are_zero_on_inadmissible_cells() {
        let mut records = collapsed_fixture();
        // Mix in some ambiguity: a few treated with s = 0, with spread-out
        // outcome values so that no variance can collapse onto them.
        for i in 0..6 {
            records.push(record(
                &format!("x{i}"),
                Arm::Test,
                Some(false),
                Outcome::continuous(0.1 + 0.22 * f64::from(i)).unwrap(),
            ));
        }
        let spec = EstimandSpec::new(StratumSet::all(), Contrast::MeanDifference);
        let options = EmOptions {
            restarts: 2,
            seed: 9,
            monotonicity: None,
            ..EmOptions::default()
        };
        let (fit, _) = em_mixture(&records, &spec, &[], &options).unwrap();
        // Treated with s=1 exclude cells with S(1)=0.
        let sorted: Vec<&ObservedRecord> = {
            let mut v: Vec<&ObservedRecord> = records.iter().collect();
            v.sort_by(|a, b| a.id.cmp(&b.id));
            v
        };
        for (r, q) in sorted.iter().zip(&fit.posteriors) {
            if let Some(s) = r.s {
                for cell in PrincipalStratum::ALL {
                    if cell.status_under(r.z) != s {
                        assert_eq!(q[cell.index()], 0.0);
                    }
                }
            }
            let total: f64 = q.iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn loglik_trace_is_nondecreasing() {
        let records = collapsed_fixture();
        let spec = EstimandSpec::new(
            StratumSet::single(PrincipalStratum::EventBoth),
            Contrast::MeanDifference,
        );
        let options = EmOptions {
            restarts: 4,
            seed: 12,
            monotonicity: Some(MonotonicityDirection::S0GeS1),
            ..EmOptions::default()
        };
        let (fit, _) = em_mixture(&records, &spec, &[], &options).unwrap();
        for pair in fit.loglik_trace.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-9,
                "log-likelihood decreased: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn vanished_target_stratum_is_an_error() {
        let records = collapsed_fixture();
        // Under S(0) >= S(1) the test-only cell is excluded; targeting it
        // must fail.
        let spec = EstimandSpec::new(
            StratumSet::single(PrincipalStratum::EventTestOnly),
            Contrast::MeanDifference,
        );
        let options = EmOptions {
            restarts: 2,
            seed: 3,
            monotonicity: Some(MonotonicityDirection::S0GeS1),
            ..EmOptions::default()
        };
        let err = em_mixture(&records, &spec, &[], &options).unwrap_err();
        assert!(err.to_string().contains("target stratum vanishes"));
    }
}
