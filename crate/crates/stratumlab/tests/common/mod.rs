//! Shared generating configurations with analytically known truths.
//!
//! The binary workhorse is a product-form design: `S(0)` and `S(1)` are
//! conditionally independent given two categorical covariates, and the
//! control-arm outcome law depends only on `S(0)`. That makes principal
//! ignorability hold by construction at `pi_violation_beta = 0`, while the
//! naive analysis stays biased because the control-arm mean still differs
//! across strata.

#![allow(dead_code)]

use std::collections::BTreeMap;

use stratumlab::sim::{
    CategoricalLevel, Censoring, CovariateGenerator, OutcomeDist, OutcomeModel, PerStratumArm,
    SimConfig, StratumModel,
};
use stratumlab::{Arm, MonotonicityDirection, ObservedRecord, PotentialRecord, PrincipalStratum};

pub fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Bernoulli success probability after an `exp(beta * y)` tilt.
pub fn tilt_bernoulli(p: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        return p;
    }
    let odds = p * beta.exp();
    odds / (odds + (1.0 - p))
}

/// Margin coefficients of the product-form stratum model, aligned to
/// [intercept, x1=b, x2=v].
const S1_COEF: [f64; 3] = [-0.5, 1.1, 0.7];
const S0_COEF: [f64; 3] = [-0.9, 1.4, 0.5];
/// Control-arm outcome probabilities by S(0).
const P0_HIGH: f64 = 0.65;
const P0_LOW: f64 = 0.35;
/// Test-arm outcome probability in the S(1)=0 cells.
const P1_S0: f64 = 0.30;
/// Planted risk difference in the S(1)=1 stratum.
pub const PLANTED_RISK_DIFFERENCE: f64 = 0.25;

/// Covariate cells (x1, x2) with their probabilities.
fn covariate_cells() -> [(f64, [f64; 2]); 4] {
    // Indicators [x1=b, x2=v]; P(x1=b) = 0.5, P(x2=v) = 0.4.
    [
        (0.5 * 0.6, [0.0, 0.0]),
        (0.5 * 0.4, [0.0, 1.0]),
        (0.5 * 0.6, [1.0, 0.0]),
        (0.5 * 0.4, [1.0, 1.0]),
    ]
}

fn margin(coef: &[f64; 3], x: &[f64; 2]) -> f64 {
    expit(coef[0] + coef[1] * x[0] + coef[2] * x[1])
}

pub struct PiBinaryTruth {
    /// E[Y(1) | S(1)=1]; equals the planted test-arm probability.
    pub e_y1_s1: f64,
    /// E[Y(0) | S(1)=1] under the given tilt.
    pub e_y0_s1: f64,
    /// e_y1_s1 - e_y0_s1.
    pub risk_difference: f64,
    /// What the naive analysis estimates for the control component,
    /// E[Y(0) | S(0)=1] (tilt-adjusted within S(1)=1 strata).
    pub naive_control_component: f64,
}

/// Exact population quantities of [`pi_binary_config`] for any tilt.
pub fn pi_binary_truth(beta: f64) -> PiBinaryTruth {
    let mut member_mass = 0.0;
    let mut member_y0 = 0.0;
    let mut s0_mass = 0.0;
    let mut s0_y0 = 0.0;
    for (p_x, x) in covariate_cells() {
        let p1 = margin(&S1_COEF, &x);
        let p0 = margin(&S0_COEF, &x);
        // Product form: P(both | x) = p0 * p1, P(test-only | x) = (1-p0) * p1.
        let tilted_high = tilt_bernoulli(P0_HIGH, beta);
        let tilted_low = tilt_bernoulli(P0_LOW, beta);
        member_mass += p_x * p1;
        member_y0 += p_x * p1 * (p0 * tilted_high + (1.0 - p0) * tilted_low);
        // Naive control component: mean of Y(0) among S(0)=1, i.e. the
        // `both` (tilted) and `control-only` (untilted) cells.
        s0_mass += p_x * p0;
        s0_y0 += p_x * p0 * (p1 * tilted_high + (1.0 - p1) * P0_HIGH);
    }
    let e_y0_s1 = member_y0 / member_mass;
    let e_y1_s1 = pi_binary_truth_baseline_y1();
    PiBinaryTruth {
        e_y1_s1,
        e_y0_s1,
        risk_difference: e_y1_s1 - e_y0_s1,
        naive_control_component: s0_y0 / s0_mass,
    }
}

/// The test-arm probability planted into the S(1)=1 cells: baseline
/// E[Y(0)|S(1)=1] plus the planted risk difference.
fn pi_binary_truth_baseline_y1() -> f64 {
    let mut member_mass = 0.0;
    let mut member_y0 = 0.0;
    for (p_x, x) in covariate_cells() {
        let p1 = margin(&S1_COEF, &x);
        let p0 = margin(&S0_COEF, &x);
        member_mass += p_x * p1;
        member_y0 += p_x * p1 * (p0 * P0_HIGH + (1.0 - p0) * P0_LOW);
    }
    member_y0 / member_mass + PLANTED_RISK_DIFFERENCE
}

fn product_form_coefficients() -> BTreeMap<String, Vec<f64>> {
    let mut coefficients = BTreeMap::new();
    coefficients.insert(
        PrincipalStratum::EventBoth.name().to_string(),
        vec![
            S0_COEF[0] + S1_COEF[0],
            S0_COEF[1] + S1_COEF[1],
            S0_COEF[2] + S1_COEF[2],
        ],
    );
    coefficients.insert(
        PrincipalStratum::EventControlOnly.name().to_string(),
        S0_COEF.to_vec(),
    );
    coefficients.insert(
        PrincipalStratum::EventTestOnly.name().to_string(),
        S1_COEF.to_vec(),
    );
    coefficients
}

fn two_categorical_covariates() -> Vec<CovariateGenerator> {
    vec![
        CovariateGenerator::Categorical {
            name: "x1".into(),
            levels: vec![
                CategoricalLevel { level: "a".into(), prob: 0.5 },
                CategoricalLevel { level: "b".into(), prob: 0.5 },
            ],
        },
        CovariateGenerator::Categorical {
            name: "x2".into(),
            levels: vec![
                CategoricalLevel { level: "u".into(), prob: 0.6 },
                CategoricalLevel { level: "v".into(), prob: 0.4 },
            ],
        },
    ]
}

/// Binary-outcome trial with two confounding covariates; satisfies principal
/// ignorability exactly when `pi_violation_beta == 0` and plants
/// [`PLANTED_RISK_DIFFERENCE`] in the `S(1)=1` stratum.
pub fn pi_binary_config(n: usize, seed: u64, pi_violation_beta: f64) -> SimConfig {
    let p1_s1 = pi_binary_truth_baseline_y1();
    SimConfig {
        n,
        stratum_model: StratumModel::MultinomialLogistic {
            coefficients: product_form_coefficients(),
        },
        covariates: two_categorical_covariates(),
        outcome_model: OutcomeModel {
            distributions: PerStratumArm::from_fn(|cell, arm| {
                let (s0, s1) = cell.statuses();
                let p = match arm {
                    Arm::Control => {
                        if s0 {
                            P0_HIGH
                        } else {
                            P0_LOW
                        }
                    }
                    Arm::Test => {
                        if s1 {
                            p1_s1
                        } else {
                            P1_S0
                        }
                    }
                };
                OutcomeDist::Bernoulli { p }
            }),
            censoring: None,
        },
        pi_violation_beta,
        seed,
    }
}

/// Simulate, assign arms 1:1, and reveal.
pub fn run_trial(
    config: &SimConfig,
    landmark: Option<f64>,
) -> (Vec<PotentialRecord>, Vec<ObservedRecord>) {
    let potentials = stratumlab::sim::simulate(config).expect("valid config");
    let arms = stratumlab::sim::assign_arms(potentials.len(), config.seed);
    let observed =
        stratumlab::sim::reveal_trial(&potentials, &arms, landmark).expect("lengths match");
    (potentials, observed)
}

// ---------------------------------------------------------------------------
// Wald / exclusion-restriction design
// ---------------------------------------------------------------------------

pub const CACE_PLANTED_EFFECT: f64 = 0.30;

/// Monotone design (S(1) >= S(0)) with the exclusion restriction: the two
/// status-unmoved cells share one outcome law across arms, and the moved
/// (test-only) cell carries a 0.30 risk difference.
pub fn cace_config(n: usize, seed: u64) -> SimConfig {
    SimConfig {
        n,
        stratum_model: StratumModel::FixedProportions {
            // [both, control_only, neither, test_only]
            proportions: [0.2, 0.0, 0.3, 0.5],
        },
        covariates: vec![],
        outcome_model: OutcomeModel {
            distributions: PerStratumArm::from_fn(|cell, arm| {
                let p = match cell {
                    PrincipalStratum::EventBoth => 0.6,
                    PrincipalStratum::EventNeither => 0.3,
                    PrincipalStratum::EventControlOnly => 0.5,
                    PrincipalStratum::EventTestOnly => match arm {
                        Arm::Control => 0.35,
                        Arm::Test => 0.35 + CACE_PLANTED_EFFECT,
                    },
                };
                OutcomeDist::Bernoulli { p }
            }),
            censoring: None,
        },
        pi_violation_beta: 0.0,
        seed,
    }
}

pub const CACE_DIRECTION: MonotonicityDirection = MonotonicityDirection::S1GeS0;

// ---------------------------------------------------------------------------
// Normal mixture design for the EM estimator
// ---------------------------------------------------------------------------

pub const EM_PROPORTIONS: [f64; 4] = [0.35, 0.40, 0.25, 0.0];
pub const EM_PLANTED_EFFECT: f64 = 0.5;

/// Well-separated normal mixture under S(0) >= S(1): component means three
/// standard deviations apart, a 0.5 mean difference planted in `event_both`.
pub fn em_config(n: usize, seed: u64) -> SimConfig {
    SimConfig {
        n,
        stratum_model: StratumModel::FixedProportions {
            proportions: EM_PROPORTIONS,
        },
        covariates: vec![],
        outcome_model: OutcomeModel {
            distributions: PerStratumArm::from_fn(|cell, arm| {
                let base = match cell {
                    PrincipalStratum::EventBoth => 0.0,
                    PrincipalStratum::EventControlOnly => 3.0,
                    PrincipalStratum::EventNeither => 6.0,
                    PrincipalStratum::EventTestOnly => 9.0,
                };
                let shift = match (cell, arm) {
                    (PrincipalStratum::EventBoth, Arm::Test) => EM_PLANTED_EFFECT,
                    (PrincipalStratum::EventControlOnly, Arm::Test) => 0.3,
                    (PrincipalStratum::EventNeither, Arm::Test) => 0.2,
                    _ => 0.0,
                };
                OutcomeDist::Normal {
                    mean: base + shift,
                    sd: 1.0,
                }
            }),
            censoring: None,
        },
        pi_violation_beta: 0.0,
        seed,
    }
}

// ---------------------------------------------------------------------------
// Time-to-event design
// ---------------------------------------------------------------------------

pub const TTE_RATE_TEST_S1: f64 = 0.08;
pub const TTE_RATE_CONTROL_S0_HIGH: f64 = 0.15;
pub const TTE_RATE_CONTROL_S0_LOW: f64 = 0.25;
pub const TTE_RATE_TEST_S0: f64 = 0.20;
pub const TTE_CENSORING: Censoring = Censoring {
    rate: 0.02,
    admin_cutoff: 30.0,
};

/// Exponential survival design with the same product-form stratum model as
/// the binary fixture: control hazards depend only on S(0), the test hazard
/// in the S(1)=1 stratum is planted. `null_effect` equalizes the S(1)=1
/// hazards across arms.
pub fn tte_config(n: usize, seed: u64, null_effect: bool) -> SimConfig {
    SimConfig {
        n,
        stratum_model: StratumModel::MultinomialLogistic {
            coefficients: product_form_coefficients(),
        },
        covariates: two_categorical_covariates(),
        outcome_model: OutcomeModel {
            distributions: PerStratumArm::from_fn(|cell, arm| {
                let (s0, s1) = cell.statuses();
                let rate = match arm {
                    Arm::Control => {
                        if s0 {
                            TTE_RATE_CONTROL_S0_HIGH
                        } else {
                            TTE_RATE_CONTROL_S0_LOW
                        }
                    }
                    Arm::Test => {
                        if s1 {
                            if null_effect {
                                // Match the control mixture rate seen by the
                                // S(1)=1 stratum on average: keep arm-wise
                                // hazards equal within each stratum cell.
                                if s0 {
                                    TTE_RATE_CONTROL_S0_HIGH
                                } else {
                                    TTE_RATE_CONTROL_S0_LOW
                                }
                            } else {
                                TTE_RATE_TEST_S1
                            }
                        } else {
                            TTE_RATE_TEST_S0
                        }
                    }
                };
                OutcomeDist::Exponential { rate }
            }),
            censoring: Some(TTE_CENSORING),
        },
        pi_violation_beta: 0.0,
        seed,
    }
}

/// Brute-force landmarked estimand from a large potential-outcome sample:
/// both potential survival probabilities conditioned on their own arm's
/// survival past the landmark, within the S(1)=1 stratum.
pub fn tte_conditional_truth(records: &[PotentialRecord], landmark: f64, t_star: f64) -> f64 {
    let mut n1 = 0usize;
    let mut above1 = 0usize;
    let mut n0 = 0usize;
    let mut above0 = 0usize;
    for r in records {
        if !r.s1 {
            continue;
        }
        let (t0, t1) = r.true_event_times.expect("tte records");
        if t1 > landmark {
            n1 += 1;
            if t1 > t_star {
                above1 += 1;
            }
        }
        if t0 > landmark {
            n0 += 1;
            if t0 > t_star {
                above0 += 1;
            }
        }
    }
    above1 as f64 / n1 as f64 - above0 as f64 / n0 as f64
}

// ---------------------------------------------------------------------------
// Monte Carlo helpers
// ---------------------------------------------------------------------------

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn sd(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Monte Carlo mean and its standard error.
pub fn mc_mean_se(values: &[f64]) -> (f64, f64) {
    (mean(values), sd(values) / (values.len() as f64).sqrt())
}
