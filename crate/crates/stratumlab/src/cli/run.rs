//! Orchestration: execute the configured methods and sensitivity scans over
//! a dataset (ingested or simulated in-process) and assemble the report.

use std::collections::BTreeMap;

use crate::cli::config::{AnalysisConfig, Method};
use crate::cli::csvio::Dataset;
use crate::cli::report::{
    DataSummary, MethodOutcome, OracleBlock, Report, SensitivityReport, REPORT_SCHEMA_VERSION,
};
use crate::core::{EstimateResult, ObservedRecord, PotentialRecord};
use crate::error::{Error, Result};
use crate::estimators::{BootstrapConfig, EmOptions};
use crate::rng::{derive_seed, PURPOSE_SIMULATION};
use crate::sensitivity;
use crate::sim;

/// Simulated-in-process trial: the observed records plus the potential
/// outcomes they were revealed from.
pub struct SimulatedTrial {
    pub potentials: Vec<PotentialRecord>,
    pub observed: Vec<ObservedRecord>,
}

/// Simulates the configured trial: generate potential outcomes, assign arms
/// 1:1, and reveal. The simulation seed is derived from the run seed.
pub fn simulate_trial(config: &AnalysisConfig) -> Result<SimulatedTrial> {
    let mut sim_config = config
        .simulation
        .clone()
        .ok_or_else(|| Error::config("no simulation block in the configuration"))?;
    sim_config.seed = derive_seed(config.seed, PURPOSE_SIMULATION);
    let potentials = sim::simulate(&sim_config)?;
    let arms = sim::assign_arms(potentials.len(), sim_config.seed);
    let observed = sim::reveal_trial(&potentials, &arms, config.estimand.landmark)?;
    Ok(SimulatedTrial {
        potentials,
        observed,
    })
}

fn run_method(
    method: Method,
    config: &AnalysisConfig,
    records: &[ObservedRecord],
    bootstrap: &BootstrapConfig,
) -> Result<MethodOutcome> {
    let spec = &config.estimand;
    let covariates = config.pi_covariates();
    let outcome: MethodOutcome = match method {
        Method::Itt => MethodOutcome::Estimate(crate::core::itt_effect(
            records,
            spec.contrast,
            bootstrap,
        )?),
        Method::Naive => {
            MethodOutcome::Estimate(crate::estimators::naive_conditioning(records, spec, bootstrap)?)
        }
        Method::Bounds => MethodOutcome::Bounds(crate::estimators::trimming_bounds(
            records,
            spec,
            config.outcome_range,
            bootstrap,
        )?),
        Method::Cace => {
            let direction = config
                .assumptions
                .monotonicity
                .ok_or_else(|| Error::config("cace requires a monotonicity direction"))?;
            MethodOutcome::Estimate(crate::estimators::wald_cace(records, direction, bootstrap)?)
        }
        Method::PiWeighting => {
            if spec.contrast.is_survival() {
                MethodOutcome::Estimate(crate::survival::stratum_survival_contrast(
                    records,
                    spec,
                    &covariates,
                    bootstrap,
                )?)
            } else {
                MethodOutcome::Estimate(crate::estimators::pi_weighting(
                    records,
                    spec,
                    &covariates,
                    bootstrap,
                )?)
            }
        }
        Method::PiStandardization => MethodOutcome::Estimate(
            crate::estimators::pi_standardization(records, spec, &covariates, bootstrap)?,
        ),
        Method::PiMi => {
            let m = config.mi.unwrap_or_default().imputations;
            MethodOutcome::Estimate(crate::estimators::pi_multiple_imputation(
                records,
                spec,
                &covariates,
                m,
                config.seed,
            )?)
        }
        Method::Em => {
            let em = config.em.unwrap_or_default();
            let options = EmOptions {
                restarts: em.restarts,
                max_iter: em.max_iter,
                seed: config.seed,
                monotonicity: config.assumptions.monotonicity,
                ..EmOptions::default()
            };
            let (_, result) = crate::estimators::em_mixture(records, spec, &covariates, &options)?;
            MethodOutcome::Estimate(result)
        }
    };
    Ok(outcome)
}

fn run_sensitivity(
    config: &AnalysisConfig,
    records: &[ObservedRecord],
    bootstrap: &BootstrapConfig,
) -> Result<Option<SensitivityReport>> {
    let Some(block) = &config.sensitivity else {
        return Ok(None);
    };
    if block.is_empty() {
        return Ok(None);
    }
    let mut report = SensitivityReport::default();
    let covariates = config.pi_covariates();

    if block.tipping.is_some() {
        let grid = config.beta_grid()?;
        match sensitivity::tipping_scan_pi(records, &config.estimand, &covariates, &grid, bootstrap)
        {
            Ok(curve) => report.tipping = Some(curve),
            Err(e) => report.tipping_error = Some(e.to_string()),
        }
    }
    if let Some(relaxation) = &block.monotonicity_relaxation {
        let direction = config
            .assumptions
            .monotonicity
            .ok_or_else(|| Error::config("monotonicity_relaxation requires a declared direction"))?;
        match sensitivity::monotonicity_relaxation(
            records,
            &config.estimand,
            direction,
            &relaxation.defier_grid,
            config.outcome_range,
            bootstrap,
        ) {
            Ok(points) => report.monotonicity_relaxation = Some(points),
            Err(e) => report.monotonicity_relaxation_error = Some(e.to_string()),
        }
    }
    if let Some(sets) = &block.covariate_sets {
        match sensitivity::covariate_set_scan(records, &config.estimand, sets, bootstrap) {
            Ok(entries) => report.covariate_scan = Some(entries),
            Err(e) => report.covariate_scan_error = Some(e.to_string()),
        }
    }
    Ok(Some(report))
}

/// Executes the configured analysis. `data` supplies ingested records; when
/// absent, the configuration's simulation block generates the trial in
/// process and the report then carries the oracle value of the estimand
/// alongside the estimates.
///
/// Method-level failures are captured inside the report; only configuration
/// validation and I/O abort.
pub fn run(config: &AnalysisConfig, data: Option<Dataset>) -> Result<Report> {
    let (records, oracle) = match data {
        Some(dataset) => {
            config.validate(Some(dataset.outcome_kind))?;
            (dataset.records, None)
        }
        None => {
            let trial = simulate_trial(config)?;
            let kind = trial
                .observed
                .first()
                .map(|r| r.y.kind())
                .ok_or_else(|| Error::config("simulation produced no records"))?;
            config.validate(Some(kind))?;
            let oracle = sim::oracle_effect(&trial.potentials, &config.estimand)?;
            (
                trial.observed,
                Some(OracleBlock {
                    estimand_value: oracle,
                }),
            )
        }
    };
    if records.is_empty() {
        return Err(Error::config("no records to analyze"));
    }

    let bootstrap = BootstrapConfig::new(config.bootstrap.replicates, config.seed);
    let mut estimates = BTreeMap::new();
    for method in &config.methods {
        let outcome = run_method(*method, config, &records, &bootstrap).unwrap_or_else(|e| {
            MethodOutcome::Error {
                message: e.to_string(),
            }
        });
        estimates.insert(method.label().to_string(), outcome);
    }
    let sensitivity = run_sensitivity(config, &records, &bootstrap)?;

    Ok(Report {
        schema: REPORT_SCHEMA_VERSION,
        seed: config.seed,
        data_summary: DataSummary::from_records(&records),
        estimates,
        sensitivity,
        oracle,
        config: config.clone(),
    })
}

/// Convenience accessor used by the benchmark: the point estimate and
/// interval of a method outcome, if it succeeded.
pub(crate) fn point_and_interval(outcome: &MethodOutcome) -> Option<(f64, Option<(f64, f64)>)> {
    match outcome {
        MethodOutcome::Estimate(EstimateResult {
            estimate,
            ci_lower,
            ci_upper,
            ..
        }) => Some((*estimate, ci_lower.zip(*ci_upper))),
        MethodOutcome::Bounds(b) => Some(((b.lower + b.upper) / 2.0, Some((b.lower, b.upper)))),
        MethodOutcome::Error { .. } => None,
    }
}
