//! Benchmark: repeat simulate-and-analyze over derived seeds and tabulate
//! bias and interval coverage per method against the per-replicate oracle.
//!
//! This is the one place where potential outcomes and estimates meet: each
//! replicate joins its own simulated truth to its estimates, which makes the
//! cost of a naive analysis visible as a bias row in an otherwise identical
//! pipeline.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cli::config::AnalysisConfig;
use crate::cli::run::{point_and_interval, run};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, PURPOSE_BENCHMARK};
use crate::sim;
use crate::util;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub replicates_ok: usize,
    pub replicates_failed: usize,
    pub mean_estimate: f64,
    pub mean_oracle: f64,
    /// Monte Carlo mean of (estimate - oracle).
    pub mean_bias: f64,
    /// Standard error of the mean bias over replicates.
    pub bias_mc_se: f64,
    /// Share of replicates whose interval covered that replicate's oracle;
    /// absent for methods without an interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_interval_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema: u32,
    pub seed: u64,
    pub replicates: usize,
    pub rows: BTreeMap<String, BenchmarkRow>,
    pub config: AnalysisConfig,
}

impl BenchmarkReport {
    pub fn to_canonical_json(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        Ok(text)
    }
}

/// Runs `replicates` independent simulate-and-analyze cycles. Replicate `r`
/// uses seed `derive(config.seed, benchmark) + r`-style derivation, so the
/// table is deterministic and insensitive to thread count.
pub fn benchmark(config: &AnalysisConfig, replicates: usize) -> Result<BenchmarkReport> {
    if config.simulation.is_none() {
        return Err(Error::config("benchmark requires a simulation block"));
    }
    if replicates == 0 {
        return Err(Error::config("benchmark requires at least one replicate"));
    }
    config.validate(None)?;
    let base_seed = derive_seed(config.seed, PURPOSE_BENCHMARK);

    struct ReplicateResult {
        oracle: f64,
        per_method: BTreeMap<String, Option<(f64, Option<(f64, f64)>)>>,
    }

    let outcomes: Vec<Result<ReplicateResult>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut replicate_config = config.clone();
            replicate_config.seed = derive_seed(base_seed, r as u64);
            let report = run(&replicate_config, None)?;
            let trial = crate::cli::run::simulate_trial(&replicate_config)?;
            let oracle = sim::oracle_effect(&trial.potentials, &replicate_config.estimand)?;
            let per_method = report
                .estimates
                .iter()
                .map(|(name, outcome)| (name.clone(), point_and_interval(outcome)))
                .collect();
            Ok(ReplicateResult { oracle, per_method })
        })
        .collect();

    let mut per_method_bias: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut per_method_estimates: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut per_method_oracles: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut per_method_cover: BTreeMap<String, Vec<bool>> = BTreeMap::new();
    let mut per_method_width: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut per_method_failures: BTreeMap<String, usize> = BTreeMap::new();

    for outcome in outcomes {
        let replicate = outcome?;
        for (method, value) in replicate.per_method {
            match value {
                Some((estimate, interval)) => {
                    per_method_bias
                        .entry(method.clone())
                        .or_default()
                        .push(estimate - replicate.oracle);
                    per_method_estimates
                        .entry(method.clone())
                        .or_default()
                        .push(estimate);
                    per_method_oracles
                        .entry(method.clone())
                        .or_default()
                        .push(replicate.oracle);
                    if let Some((lo, hi)) = interval {
                        per_method_cover
                            .entry(method.clone())
                            .or_default()
                            .push(lo <= replicate.oracle && replicate.oracle <= hi);
                        per_method_width.entry(method).or_default().push(hi - lo);
                    }
                }
                None => *per_method_failures.entry(method).or_default() += 1,
            }
        }
    }

    let mut rows = BTreeMap::new();
    for (method, biases) in &per_method_bias {
        let n = biases.len();
        let coverage = per_method_cover
            .get(method)
            .filter(|v| !v.is_empty())
            .map(|v| v.iter().filter(|c| **c).count() as f64 / v.len() as f64);
        let width = per_method_width
            .get(method)
            .filter(|v| !v.is_empty())
            .map(|v| util::mean(v));
        rows.insert(
            method.clone(),
            BenchmarkRow {
                replicates_ok: n,
                replicates_failed: per_method_failures.get(method).copied().unwrap_or(0),
                mean_estimate: util::mean(&per_method_estimates[method]),
                mean_oracle: util::mean(&per_method_oracles[method]),
                mean_bias: util::mean(biases),
                bias_mc_se: util::sample_sd(biases) / (n as f64).sqrt(),
                coverage,
                mean_interval_width: width,
            },
        );
    }
    for (method, failed) in per_method_failures {
        rows.entry(method).or_insert(BenchmarkRow {
            replicates_ok: 0,
            replicates_failed: failed,
            mean_estimate: f64::NAN,
            mean_oracle: f64::NAN,
            mean_bias: f64::NAN,
            bias_mc_se: f64::NAN,
            coverage: None,
            mean_interval_width: None,
        });
    }

    Ok(BenchmarkReport {
        schema: crate::cli::report::REPORT_SCHEMA_VERSION,
        seed: config.seed,
        replicates,
        rows,
        config: config.clone(),
    })
}

pub fn render_benchmark_text(report: &BenchmarkReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "benchmark: {} replicates, seed {}",
        report.replicates, report.seed
    );
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<22} {:>6} {:>6} {:>12} {:>12} {:>12} {:>10} {:>9} {:>10}",
        "method", "ok", "fail", "mean_est", "mean_oracle", "mean_bias", "bias_se", "coverage", "ci_width"
    );
    for (method, row) in &report.rows {
        let _ = writeln!(
            out,
            "{:<22} {:>6} {:>6} {:>12.6} {:>12.6} {:>12.6} {:>10.6} {:>9} {:>10}",
            method,
            row.replicates_ok,
            row.replicates_failed,
            row.mean_estimate,
            row.mean_oracle,
            row.mean_bias,
            row.bias_mc_se,
            row.coverage
                .map(|c| format!("{:.3}", c))
                .unwrap_or_else(|| "-".to_string()),
            row.mean_interval_width
                .map(|w| format!("{:.4}", w))
                .unwrap_or_else(|| "-".to_string()),
        );
    }
    out
}
