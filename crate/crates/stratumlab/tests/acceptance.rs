//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Every tolerance is pinned here. Monte Carlo checks compare estimator
//! sweeps against oracles computed from the simulated potential outcomes.

mod common;

use std::time::Instant;

use common::*;
use stratumlab::estimators::{naive_conditioning, pi_weighting, trimming_bounds, EmOptions};
use stratumlab::sensitivity::{tipping_scan_pi, PointOutcome};
use stratumlab::sim::{oracle_effect, simulate};
use stratumlab::survival::{
    landmark_restriction, stratum_survival_contrast, weighted_km,
};
use stratumlab::{
    Arm, BootstrapConfig, Contrast, EstimandSpec, MonotonicityDirection, PrincipalStratum,
    StratumSet,
};

fn s1_risk_difference() -> EstimandSpec {
    EstimandSpec::new(
        StratumSet::with_status(Arm::Test, true),
        Contrast::RiskDifference,
    )
}

const PI_COVARIATES: [&str; 2] = ["x1", "x2"];

fn pi_covariates() -> Vec<String> {
    PI_COVARIATES.iter().map(|s| s.to_string()).collect()
}

/// Criterion 1: with principal ignorability holding by construction and a
/// planted 0.25 risk difference in {S(1)=1} at N = 2000, the MC mean of the
/// weighting estimator over 200 seeds is within 3 MC SEs of the oracle; a
/// single run takes < 2 s and the sweep < 2 min.
#[test]
fn criterion_01_oracle_recovery_under_pi() {
    let spec = s1_risk_difference();
    let covariates = pi_covariates();

    let single_start = Instant::now();
    let config = pi_binary_config(2000, 1, 0.0);
    let (_, observed) = run_trial(&config, None);
    let single =
        pi_weighting(&observed, &spec, &covariates, &BootstrapConfig::new(500, 1)).unwrap();
    let single_elapsed = single_start.elapsed();
    assert!(
        single_elapsed.as_secs_f64() < 2.0,
        "single run took {single_elapsed:?} (budget 2 s)"
    );
    assert!(single.ci_lower.unwrap() <= single.estimate);
    assert!(single.estimate <= single.ci_upper.unwrap());

    let sweep_start = Instant::now();
    let diffs: Vec<f64> = (0..200)
        .map(|r| {
            let seed = 100 + r;
            let config = pi_binary_config(2000, seed, 0.0);
            let (potentials, observed) = run_trial(&config, None);
            let oracle = oracle_effect(&potentials, &spec).unwrap();
            let estimate =
                pi_weighting(&observed, &spec, &covariates, &BootstrapConfig::new(200, seed))
                    .unwrap()
                    .estimate;
            estimate - oracle
        })
        .collect();
    let sweep_elapsed = sweep_start.elapsed();
    let (bias, se) = mc_mean_se(&diffs);
    assert!(
        bias.abs() <= 3.0 * se,
        "pi_weighting bias {bias} exceeds 3 MC SEs ({se})"
    );
    assert!(
        sweep_elapsed.as_secs_f64() < 120.0,
        "sweep took {sweep_elapsed:?} (budget 2 min)"
    );
    assert!(
        (pi_binary_truth(0.0).risk_difference - PLANTED_RISK_DIFFERENCE).abs() < 1e-12,
        "fixture must plant a 0.25 risk difference"
    );
    println!(
        "criterion 1 PASS: pi_weighting bias {bias:+.5} (3 MC SE {:.5}), single run {:.2}s, sweep {:.1}s",
        3.0 * se,
        single_elapsed.as_secs_f64(),
        sweep_elapsed.as_secs_f64()
    );
}

/// Criterion 2: under the same selection design, the naive subset analysis
/// is materially biased: its MC mean absolute error exceeds the weighting
/// estimator's, and its bias exceeds 5 MC SEs of zero.
#[test]
fn criterion_02_naive_bias_reproduction() {
    let spec = s1_risk_difference();
    let covariates = pi_covariates();
    let mut naive_diffs = Vec::with_capacity(200);
    let mut weighting_diffs = Vec::with_capacity(200);
    for r in 0..200 {
        let seed = 300 + r;
        let config = pi_binary_config(2000, seed, 0.0);
        let (potentials, observed) = run_trial(&config, None);
        let oracle = oracle_effect(&potentials, &spec).unwrap();
        let boot = BootstrapConfig::new(200, seed);
        naive_diffs.push(naive_conditioning(&observed, &spec, &boot).unwrap().estimate - oracle);
        weighting_diffs
            .push(pi_weighting(&observed, &spec, &covariates, &boot).unwrap().estimate - oracle);
    }
    let naive_abs = mean(&naive_diffs.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let weighting_abs = mean(&weighting_diffs.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let (naive_bias, naive_se) = mc_mean_se(&naive_diffs);
    assert!(
        naive_abs > weighting_abs,
        "naive MC |bias| {naive_abs} does not exceed weighting {weighting_abs}"
    );
    assert!(
        naive_bias.abs() > 5.0 * naive_se,
        "naive bias {naive_bias} is within 5 MC SEs ({naive_se}) of zero"
    );
    println!(
        "criterion 2 PASS: naive |bias| {naive_abs:.4} > pi_weighting |bias| {weighting_abs:.4}; \
         naive bias {naive_bias:+.4} at {:.1} MC SEs",
        naive_bias.abs() / naive_se
    );
}

/// Criterion 3: the trimming bounds for E[Y(0) | S(1)=1] contain the oracle
/// value in at least 99% of 500 simulated trials at N = 2000.
#[test]
fn criterion_03_bounds_validity() {
    let spec = s1_risk_difference();
    let mut covered = 0usize;
    let trials = 500usize;
    for r in 0..trials {
        let seed = 1000 + r as u64;
        let config = pi_binary_config(2000, seed, 0.0);
        let (potentials, observed) = run_trial(&config, None);
        // Oracle control component: mean of Y(0) among this trial's stratum
        // members, straight from the potential outcomes.
        let members: Vec<f64> = potentials
            .iter()
            .filter(|p| p.s1)
            .map(|p| p.y0.numeric_value().unwrap())
            .collect();
        let oracle = mean(&members);
        let bounds =
            trimming_bounds(&observed, &spec, None, &BootstrapConfig::new(100, seed)).unwrap();
        assert!(bounds.lower <= bounds.upper);
        let (lo, hi) = bounds.control_component;
        if lo <= oracle && oracle <= hi {
            covered += 1;
        }
    }
    let coverage = covered as f64 / trials as f64;
    assert!(
        coverage >= 0.99,
        "bounds covered the oracle in only {coverage:.3} of trials"
    );
    println!("criterion 3 PASS: bounds coverage {coverage:.3} over {trials} trials");
}

/// Criterion 4: under monotonicity plus exclusion restriction with a planted
/// 0.30 effect in the moved stratum, the Wald estimator's MC mean over 200
/// seeds is within 3 MC SEs of the per-seed oracle.
#[test]
fn criterion_04_cace_recovery() {
    let moved_spec = EstimandSpec::new(
        StratumSet::single(PrincipalStratum::EventTestOnly),
        Contrast::MeanDifference,
    );
    let diffs: Vec<f64> = (0..200)
        .map(|r| {
            let seed = 2000 + r;
            let config = cace_config(4000, seed);
            let (potentials, observed) = run_trial(&config, None);
            let oracle = oracle_effect(&potentials, &moved_spec).unwrap();
            let estimate = stratumlab::estimators::wald_cace(
                &observed,
                CACE_DIRECTION,
                &BootstrapConfig::new(200, seed),
            )
            .unwrap()
            .estimate;
            estimate - oracle
        })
        .collect();
    let (bias, se) = mc_mean_se(&diffs);
    assert!(
        bias.abs() <= 3.0 * se,
        "wald_cace bias {bias} exceeds 3 MC SEs ({se})"
    );
    println!(
        "criterion 4 PASS: wald_cace bias {bias:+.5} (3 MC SE {:.5}) against planted {}",
        3.0 * se,
        CACE_PLANTED_EFFECT
    );
}

/// Criterion 5: on a well-separated normal mixture at N = 4000 the EM fit
/// recovers stratum proportions within 0.03 absolute, the stratum effect
/// within 3 MC SEs, and its log-likelihood never decreases.
#[test]
fn criterion_05_em_recovery() {
    let spec = EstimandSpec::new(
        StratumSet::single(PrincipalStratum::EventBoth),
        Contrast::MeanDifference,
    );
    let mut diffs = Vec::new();
    for r in 0..20 {
        let seed = 3000 + r;
        let config = em_config(4000, seed);
        let (potentials, observed) = run_trial(&config, None);
        let oracle = oracle_effect(&potentials, &spec).unwrap();
        let options = EmOptions {
            restarts: 5,
            seed,
            monotonicity: Some(MonotonicityDirection::S0GeS1),
            ..EmOptions::default()
        };
        let (fit, result) =
            stratumlab::estimators::em_mixture(&observed, &spec, &[], &options).unwrap();
        for pair in fit.loglik_trace.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-9,
                "log-likelihood decreased in seed {seed}: {} -> {}",
                pair[0],
                pair[1]
            );
        }
        for cell in PrincipalStratum::ALL {
            let err = (fit.fitted_proportions[cell.index()] - EM_PROPORTIONS[cell.index()]).abs();
            assert!(
                err <= 0.03,
                "seed {seed}: proportion of {cell} off by {err:.4}"
            );
        }
        diffs.push(result.estimate - oracle);
    }
    let (bias, se) = mc_mean_se(&diffs);
    assert!(
        bias.abs() <= 3.0 * se,
        "EM stratum-effect bias {bias} exceeds 3 MC SEs ({se})"
    );
    println!(
        "criterion 5 PASS: EM proportions within 0.03, effect bias {bias:+.5} (3 MC SE {:.5}), \
         log-likelihood nondecreasing in all 20 runs",
        3.0 * se
    );
}

/// Criterion 6: weighted KM with unit weights equals the hand-computed
/// product-limit values exactly; the restricted mean of an Exponential(0.1)
/// sample at t* = 10 is within 3 MC SEs of (1 - e^{-1}) / 0.1.
#[test]
fn criterion_06_survival_identities() {
    // Hand-computed 6-subject fixture: times 1(e), 2(c), 3(e), 4(e), 5(c),
    // 6(e) give survival 5/6, 5/8, 5/12, 0.
    let times = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let events = [true, false, true, true, false, true];
    let curve = weighted_km(&times, &events, &[1.0; 6]).unwrap();
    let expected = [5.0 / 6.0, 5.0 / 8.0, 5.0 / 12.0, 0.0];
    assert_eq!(curve.times, vec![1.0, 3.0, 4.0, 6.0]);
    for (got, want) in curve.survival.iter().zip(expected) {
        assert!((got - want).abs() < 1e-15, "KM value {got} != {want}");
    }

    // Exponential(0.1) restricted mean at t* = 10: closed form 6.3212.
    use stratumlab::sim::{Censoring, OutcomeDist, OutcomeModel, PerStratumArm, SimConfig, StratumModel};
    let config = SimConfig {
        n: 10_000,
        stratum_model: StratumModel::FixedProportions {
            proportions: [1.0, 0.0, 0.0, 0.0],
        },
        covariates: vec![],
        outcome_model: OutcomeModel {
            distributions: PerStratumArm::from_fn(|_, _| OutcomeDist::Exponential { rate: 0.1 }),
            censoring: Some(Censoring {
                rate: 1e-12,
                admin_cutoff: 1e6,
            }),
        },
        pi_violation_beta: 0.0,
        seed: 606,
    };
    let potentials = simulate(&config).unwrap();
    let sample: Vec<f64> = potentials
        .iter()
        .map(|p| p.true_event_times.unwrap().1)
        .collect();
    let events = vec![true; sample.len()];
    let curve = weighted_km(&sample, &events, &vec![1.0; sample.len()]).unwrap();
    let rmst = curve.rmst(10.0);
    let closed_form = (1.0 - (-1.0f64).exp()) / 0.1;
    let restricted: Vec<f64> = sample.iter().map(|t| t.min(10.0)).collect();
    let se = sd(&restricted) / (restricted.len() as f64).sqrt();
    assert!(
        (rmst - closed_form).abs() <= 3.0 * se,
        "RMST {rmst} vs closed form {closed_form} (3 MC SE {})",
        3.0 * se
    );

    // Survival difference of Exponential(0.1) vs Exponential(0.2) at t* = 5:
    // closed form e^{-0.5} - e^{-1.0}.
    let control: Vec<f64> = potentials
        .iter()
        .map(|p| p.true_event_times.unwrap().0 * 0.5)
        .collect();
    let control_curve = weighted_km(&control, &vec![true; control.len()], &vec![1.0; control.len()]).unwrap();
    let diff = stratumlab::survival::survival_diff_at(&curve, &control_curve, 5.0).unwrap();
    let closed_diff = (-0.5f64).exp() - (-1.0f64).exp();
    let se_diff = (2.0 * 0.25 / sample.len() as f64).sqrt();
    assert!(
        (diff - closed_diff).abs() <= 3.0 * se_diff,
        "delta(5) = {diff} vs closed form {closed_diff}"
    );
    println!(
        "criterion 6 PASS: KM fixture exact; RMST {rmst:.4} vs {closed_form:.4}; delta(5) {diff:.4} vs {closed_diff:.4}"
    );
}

/// Criterion 7: the beta = 0 grid point of the tipping scan is bit-identical
/// to pi_weighting under the same seed, and scanning at the planted tilt
/// beats beta = 0 in at least 90% of 200 seeds.
#[test]
fn criterion_07_tipping_baseline() {
    let spec = s1_risk_difference();
    let covariates = pi_covariates();

    // Bit-identity at beta = 0.
    let config = pi_binary_config(2000, 7001, 0.0);
    let (_, observed) = run_trial(&config, None);
    let boot = BootstrapConfig::new(300, 7001);
    let direct = pi_weighting(&observed, &spec, &covariates, &boot).unwrap();
    let curve = tipping_scan_pi(&observed, &spec, &covariates, &[-0.5, 0.0, 0.5], &boot).unwrap();
    match &curve.grid[1].outcome {
        PointOutcome::Ok {
            estimate,
            ci_lower,
            ci_upper,
        } => {
            assert!(estimate.to_bits() == direct.estimate.to_bits(), "estimate differs");
            assert!(ci_lower.to_bits() == direct.ci_lower.unwrap().to_bits());
            assert!(ci_upper.to_bits() == direct.ci_upper.unwrap().to_bits());
        }
        other => panic!("beta = 0 point failed: {other:?}"),
    }

    // Matched tilt: the scan point at the planted violation is closer to the
    // oracle than the untitled point in >= 90% of seeds.
    let planted_beta = 1.0;
    let mut wins = 0usize;
    let seeds = 200u64;
    for r in 0..seeds {
        let seed = 7100 + r;
        let config = pi_binary_config(2000, seed, planted_beta);
        let (potentials, observed) = run_trial(&config, None);
        let oracle = oracle_effect(&potentials, &spec).unwrap();
        let curve = tipping_scan_pi(
            &observed,
            &spec,
            &covariates,
            &[0.0, planted_beta],
            &BootstrapConfig::new(100, seed),
        )
        .unwrap();
        let estimate = |i: usize| match &curve.grid[i].outcome {
            PointOutcome::Ok { estimate, .. } => *estimate,
            other => panic!("grid point failed: {other:?}"),
        };
        if (estimate(1) - oracle).abs() < (estimate(0) - oracle).abs() {
            wins += 1;
        }
    }
    let share = wins as f64 / seeds as f64;
    assert!(
        share >= 0.90,
        "matched tilt beat beta=0 in only {share:.3} of seeds"
    );
    println!("criterion 7 PASS: beta=0 bit-identical; matched tilt wins {share:.3} of seeds");
}

/// Criterion 8: landmark restriction is idempotent and matches brute-force
/// enumeration; the landmarked analysis recovers the planted conditional
/// delta(t*) within 3 MC SEs.
#[test]
fn criterion_08_landmark_filter() {
    let landmark = 2.0;
    let t_star = 10.0;

    // Enumeration and idempotence on a simulated set.
    let config = tte_config(500, 8000, false);
    let (_, observed) = run_trial(&config, Some(landmark));
    let brute: Vec<&stratumlab::ObservedRecord> = observed
        .iter()
        .filter(|r| r.y.time_event().unwrap().0 >= landmark)
        .collect();
    let once = landmark_restriction(&observed, landmark).unwrap();
    assert_eq!(once.records.len(), brute.len());
    for (kept, expected) in once.records.iter().zip(brute) {
        assert_eq!(kept, expected);
    }
    let twice = landmark_restriction(&once.records, landmark).unwrap();
    assert_eq!(once.records, twice.records);

    // Recovery of the conditional survival difference.
    let spec = EstimandSpec::new(
        StratumSet::with_status(Arm::Test, true),
        Contrast::SurvivalDifferenceAt { t_star },
    )
    .with_landmark(landmark);
    let covariates = pi_covariates();
    let diffs: Vec<f64> = (0..100)
        .map(|r| {
            let seed = 8100 + r;
            let config = tte_config(2000, seed, false);
            let (potentials, observed) = run_trial(&config, Some(landmark));
            let truth = tte_conditional_truth(&potentials, landmark, t_star);
            let estimate = stratum_survival_contrast(
                &observed,
                &spec,
                &covariates,
                &BootstrapConfig::new(100, seed),
            )
            .unwrap()
            .estimate;
            estimate - truth
        })
        .collect();
    let (bias, se) = mc_mean_se(&diffs);
    assert!(
        bias.abs() <= 3.0 * se,
        "landmarked delta(t*) bias {bias} exceeds 3 MC SEs ({se})"
    );
    println!(
        "criterion 8 PASS: landmark filter exact and idempotent; conditional delta bias {bias:+.5} (3 MC SE {:.5})",
        3.0 * se
    );
}

/// Criterion 9: any subcommand run twice with identical inputs and seed
/// yields byte-identical outputs, and analyses are invariant to a CSV round
/// trip. Exercises the real binary.
#[test]
fn criterion_09_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_stratumlab");

    let config_json = serde_json::json!({
        "schema": 1,
        "seed": 99,
        "estimand": {
            "stratum": "s1=1",
            "contrast": { "type": "risk_difference" }
        },
        "assumptions": {
            "monotonicity": null,
            "principal_ignorability_covariates": ["x1", "x2"],
            "exclusion_restriction": false
        },
        "methods": ["itt", "naive", "bounds", "pi_weighting", "pi_standardization"],
        "bootstrap": { "replicates": 150 },
        "sensitivity": {
            "tipping": { "beta_grid": { "min": -1.0, "max": 1.0, "points": 11 } }
        },
        "simulation": serde_json::to_value(pi_binary_config(400, 0, 0.0)).unwrap()
    });
    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config_json).unwrap()).unwrap();

    let run = |args: &[&str]| {
        let output = std::process::Command::new(bin)
            .args(args)
            .current_dir(dir.path())
            .output()
            .expect("binary runs");
        assert!(
            output.status.success(),
            "command {args:?} failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    };
    let read = |name: &str| std::fs::read(dir.path().join(name)).expect(name);

    // simulate twice: byte-identical CSV and oracle sidecar.
    run(&["simulate", "--config", "config.json", "--out", "sim_a"]);
    run(&["simulate", "--config", "config.json", "--out", "sim_b"]);
    assert_eq!(read("sim_a.csv"), read("sim_b.csv"), "simulate not reproducible");
    assert_eq!(read("sim_a_oracle.csv"), read("sim_b_oracle.csv"));

    // analyze twice from the same CSV: byte-identical reports.
    run(&["analyze", "--config", "config.json", "--data", "sim_a.csv", "--out", "an_a"]);
    run(&["analyze", "--config", "config.json", "--data", "sim_a.csv", "--out", "an_b"]);
    assert_eq!(read("an_a.json"), read("an_b.json"), "analyze not reproducible");
    assert_eq!(read("an_a.txt"), read("an_b.txt"));
    assert_eq!(read("an_a_tipping.svg"), read("an_b_tipping.svg"));

    // CSV round trip: the in-memory simulate-and-analyze path produces the
    // same estimates as analyzing the written CSV.
    run(&["analyze", "--config", "config.json", "--out", "an_mem"]);
    let from_csv: serde_json::Value =
        serde_json::from_slice(&read("an_a.json")).unwrap();
    let in_memory: serde_json::Value =
        serde_json::from_slice(&read("an_mem.json")).unwrap();
    assert_eq!(
        from_csv["estimates"], in_memory["estimates"],
        "CSV round trip changed the estimates"
    );
    assert_eq!(from_csv["sensitivity"], in_memory["sensitivity"]);
    assert!(in_memory["oracle"].is_object(), "in-memory run reports the oracle");
    assert!(from_csv["oracle"].is_null(), "file-based run must not see the oracle");

    // sensitivity and benchmark: byte-identical across runs.
    run(&["sensitivity", "--config", "config.json", "--data", "sim_a.csv", "--out", "sens_a"]);
    run(&["sensitivity", "--config", "config.json", "--data", "sim_a.csv", "--out", "sens_b"]);
    assert_eq!(read("sens_a.json"), read("sens_b.json"));

    run(&["benchmark", "--config", "config.json", "--out", "bench_a", "--replicates", "10"]);
    run(&["benchmark", "--config", "config.json", "--out", "bench_b", "--replicates", "10"]);
    assert_eq!(read("bench_a.json"), read("bench_b.json"), "benchmark not reproducible");

    // Canonical JSON: re-parse and re-emit is byte-identical.
    let raw = read("an_a.json");
    let value: serde_json::Value = serde_json::from_slice(&raw).unwrap();
    let mut reemitted = serde_json::to_string_pretty(&value).unwrap();
    reemitted.push('\n');
    assert_eq!(raw, reemitted.into_bytes(), "JSON re-emission not canonical");

    println!("criterion 9 PASS: simulate/analyze/sensitivity/benchmark byte-identical; CSV round trip invariant");
}

/// Criterion 10: the 95% percentile bootstrap interval of pi_weighting
/// covers the oracle in 92% to 98% of 300 replicates at N = 2000.
#[test]
fn criterion_10_bootstrap_coverage() {
    let spec = s1_risk_difference();
    let covariates = pi_covariates();
    let replicates = 300u64;
    let mut covered = 0usize;
    for r in 0..replicates {
        let seed = 9000 + r;
        let config = pi_binary_config(2000, seed, 0.0);
        let (potentials, observed) = run_trial(&config, None);
        let oracle = oracle_effect(&potentials, &spec).unwrap();
        let result =
            pi_weighting(&observed, &spec, &covariates, &BootstrapConfig::new(500, seed)).unwrap();
        if result.ci_lower.unwrap() <= oracle && oracle <= result.ci_upper.unwrap() {
            covered += 1;
        }
    }
    let coverage = covered as f64 / replicates as f64;
    assert!(
        (0.92..=0.98).contains(&coverage),
        "bootstrap coverage {coverage:.3} outside [0.92, 0.98]"
    );
    println!("criterion 10 PASS: bootstrap coverage {coverage:.3} over {replicates} replicates");
}
