//! Stratified bootstrap for percentile confidence intervals.
//!
//! Resampling is with replacement within each arm, preserving the realized
//! arm sizes. Replicate `r` draws from its own random stream, so replicates
//! can run on any number of threads without changing the result.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::core::{Arm, ObservedRecord};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, substream, PURPOSE_BOOTSTRAP};

/// Replicate count and master seed for one bootstrap run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(replicates: usize, seed: u64) -> Self {
        BootstrapConfig { replicates, seed }
    }
}

/// Percentile interval plus resampling diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapSummary {
    pub lower: f64,
    pub upper: f64,
    /// Resamples on which the statistic errored; recorded and skipped.
    pub failures: usize,
    /// Resamples that contributed to the interval.
    pub used: usize,
}

/// Raw per-replicate draws of a vector-valued statistic, one inner vector per
/// successful resample, in replicate order.
pub(crate) struct BootstrapDraws {
    pub samples: Vec<Vec<f64>>,
    pub failures: usize,
}

const MAX_FAILURE_SHARE: f64 = 0.20;

/// Percentile bootstrap interval (2.5% / 97.5%) of a scalar statistic.
///
/// The statistic must be a pure function of a record list. Errors when fewer
/// than 100 replicates are requested or when more than 20% of resamples fail.
pub fn bootstrap_ci<F>(
    statistic: F,
    records: &[&ObservedRecord],
    config: &BootstrapConfig,
) -> Result<BootstrapSummary>
where
    F: Fn(&[&ObservedRecord]) -> Result<f64> + Sync,
{
    let draws = bootstrap_draws(|r| statistic(r).map(|v| vec![v]), records, config)?;
    let mut values: Vec<f64> = draws.samples.iter().map(|v| v[0]).collect();
    values.sort_by(|a, b| a.total_cmp(b));
    let (lower, upper) = percentile_interval(&values);
    Ok(BootstrapSummary {
        lower,
        upper,
        failures: draws.failures,
        used: values.len(),
    })
}

/// Shared engine for scalar and vector statistics.
pub(crate) fn bootstrap_draws<F>(
    statistic: F,
    records: &[&ObservedRecord],
    config: &BootstrapConfig,
) -> Result<BootstrapDraws>
where
    F: Fn(&[&ObservedRecord]) -> Result<Vec<f64>> + Sync,
{
    if config.replicates < 100 {
        return Err(Error::invalid(format!(
            "bootstrap requires at least 100 replicates, got {}",
            config.replicates
        )));
    }
    let control: Vec<&ObservedRecord> =
        records.iter().copied().filter(|r| r.z == Arm::Control).collect();
    let test: Vec<&ObservedRecord> =
        records.iter().copied().filter(|r| r.z == Arm::Test).collect();

    let seed = derive_seed(config.seed, PURPOSE_BOOTSTRAP);
    let outcomes: Vec<Option<Vec<f64>>> = (0..config.replicates)
        .into_par_iter()
        .map(|replicate| {
            let mut rng = substream(seed, replicate as u64);
            let mut resample: Vec<&ObservedRecord> =
                Vec::with_capacity(control.len() + test.len());
            for _ in 0..control.len() {
                resample.push(control[rng.random_range(0..control.len())]);
            }
            for _ in 0..test.len() {
                resample.push(test[rng.random_range(0..test.len())]);
            }
            statistic(&resample).ok()
        })
        .collect();

    let failures = outcomes.iter().filter(|o| o.is_none()).count();
    if failures as f64 > MAX_FAILURE_SHARE * config.replicates as f64 {
        return Err(Error::BootstrapUnstable {
            failures,
            total: config.replicates,
        });
    }
    Ok(BootstrapDraws {
        samples: outcomes.into_iter().flatten().collect(),
        failures,
    })
}

/// 2.5% and 97.5% order statistics of a sorted sample.
pub(crate) fn percentile_interval(sorted: &[f64]) -> (f64, f64) {
    let m = sorted.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let lo = ((0.025 * m as f64) as usize).min(m - 1);
    let hi = ((0.975 * m as f64) as usize).min(m - 1);
    (sorted[lo], sorted[hi])
}
