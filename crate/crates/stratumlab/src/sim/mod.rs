//! Synthetic trials with full potential outcomes, and the oracle effects they
//! imply.
//!
//! The simulator draws, per subject: covariates, a principal stratum given
//! the covariates, and one potential outcome per arm given the stratum. What
//! a real trial would observe is produced by [`reveal`], which copies the
//! potential outcome of the assigned arm verbatim; [`oracle_effect`] computes
//! the estimand directly from the potential outcomes, which is exactly what
//! no real analysis can do.
//!
//! Subject `i` draws from its own random stream derived from the seed and
//! `i`, in a fixed order (covariates, stratum, control outcome, test outcome,
//! censoring), so extending `n` never reshuffles earlier subjects and
//! generation may run on any number of threads.

mod config;

pub use config::{
    CategoricalLevel, Censoring, CovariateGenerator, OutcomeDist, OutcomeModel, PerStratumArm,
    SimConfig, StratumModel, REFERENCE_CELL,
};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;

use crate::core::{
    classify_stratum, Arm, CovariateValue, CovariateVector, EstimandSpec, ObservedRecord, Outcome,
    PotentialRecord, PrincipalStratum,
};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, substream, PURPOSE_ARMS, PURPOSE_SUBJECT};
use crate::util;

/// Expanded design row (no intercept) of a covariate vector under the
/// generator-declared coding: levels sorted alphabetically, first level is
/// the reference. Matches `CovariateSchema` expansion on the same data.
fn expanded_row(generators: &[CovariateGenerator], x: &CovariateVector) -> Vec<f64> {
    let mut row = Vec::new();
    for generator in generators {
        match generator {
            CovariateGenerator::Continuous { name, .. } => {
                if let Some(CovariateValue::Continuous(v)) = x.get(name) {
                    row.push(*v);
                }
            }
            CovariateGenerator::Categorical { name, levels } => {
                let mut sorted: Vec<&str> = levels.iter().map(|l| l.level.as_str()).collect();
                sorted.sort_unstable();
                let value = match x.get(name) {
                    Some(CovariateValue::Categorical(level)) => level.as_str(),
                    _ => continue,
                };
                for level in sorted.iter().skip(1) {
                    row.push(if *level == value { 1.0 } else { 0.0 });
                }
            }
        }
    }
    row
}

fn draw_covariates(
    generators: &[CovariateGenerator],
    rng: &mut ChaCha8Rng,
) -> Result<CovariateVector> {
    let mut x = CovariateVector::empty();
    for generator in generators {
        match generator {
            CovariateGenerator::Categorical { name, levels } => {
                let u: f64 = rng.random();
                let mut cumulative = 0.0;
                let mut chosen = levels.last().expect("validated nonempty").level.clone();
                for level in levels {
                    cumulative += level.prob;
                    if u < cumulative {
                        chosen = level.level.clone();
                        break;
                    }
                }
                x.push(name.clone(), CovariateValue::Categorical(chosen))?;
            }
            CovariateGenerator::Continuous { name, mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                x.push(name.clone(), CovariateValue::Continuous(mean + sd * z))?;
            }
        }
    }
    Ok(x)
}

fn draw_stratum(config: &SimConfig, x: &CovariateVector, rng: &mut ChaCha8Rng) -> PrincipalStratum {
    let probs: [f64; 4] = match &config.stratum_model {
        StratumModel::FixedProportions { proportions } => *proportions,
        StratumModel::MultinomialLogistic { coefficients } => {
            let row = expanded_row(&config.covariates, x);
            let mut logits = [0.0f64; 4];
            for cell in PrincipalStratum::ALL {
                if cell == REFERENCE_CELL {
                    continue;
                }
                let beta = &coefficients[cell.name()];
                let mut eta = beta[0];
                for (b, v) in beta[1..].iter().zip(&row) {
                    eta += b * v;
                }
                logits[cell.index()] = eta;
            }
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut probs = [0.0f64; 4];
            let mut total = 0.0;
            for (p, l) in probs.iter_mut().zip(&logits) {
                *p = (l - max).exp();
                total += *p;
            }
            for p in &mut probs {
                *p /= total;
            }
            probs
        }
    };
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for cell in PrincipalStratum::ALL {
        cumulative += probs[cell.index()];
        if u < cumulative {
            return cell;
        }
    }
    *PrincipalStratum::ALL.last().unwrap()
}

/// Exponential tilt of an outcome distribution by `exp(beta * y)`. Exact for
/// all three families: Bernoulli odds scale by `exp(beta)`, a normal mean
/// shifts by `beta * sd^2`, an exponential rate drops by `beta`.
fn tilted(dist: OutcomeDist, beta: f64) -> OutcomeDist {
    if beta == 0.0 {
        return dist;
    }
    match dist {
        OutcomeDist::Bernoulli { p } => {
            let odds = p * beta.exp();
            OutcomeDist::Bernoulli {
                p: odds / (odds + (1.0 - p)),
            }
        }
        OutcomeDist::Normal { mean, sd } => OutcomeDist::Normal {
            mean: mean + beta * sd * sd,
            sd,
        },
        OutcomeDist::Exponential { rate } => OutcomeDist::Exponential { rate: rate - beta },
    }
}

/// Draws the true (uncensored) outcome value.
fn draw_value(dist: OutcomeDist, rng: &mut ChaCha8Rng) -> f64 {
    match dist {
        OutcomeDist::Bernoulli { p } => f64::from(u8::from(rng.random_bool(p))),
        OutcomeDist::Normal { mean, sd } => {
            let z: f64 = StandardNormal.sample(rng);
            mean + sd * z
        }
        OutcomeDist::Exponential { rate } => Exp::new(rate).expect("validated").sample(rng),
    }
}

/// Generates `n` subjects with full potential outcomes. Deterministic in the
/// configuration including its seed; byte-identical across runs and thread
/// counts.
pub fn simulate(config: &SimConfig) -> Result<Vec<PotentialRecord>> {
    config.validate()?;
    let seed = derive_seed(config.seed, PURPOSE_SUBJECT);
    let is_tte = config.outcome_kind() == crate::core::OutcomeKind::TimeToEvent;

    let records: Result<Vec<PotentialRecord>> = (0..config.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let x = draw_covariates(&config.covariates, &mut rng)?;
            let stratum = draw_stratum(config, &x, &mut rng);
            let (s0, s1) = stratum.statuses();

            let control_dist = *config.outcome_model.distributions.get(stratum, Arm::Control);
            let control_dist = if s1 {
                tilted(control_dist, config.pi_violation_beta)
            } else {
                control_dist
            };
            let test_dist = *config.outcome_model.distributions.get(stratum, Arm::Test);

            let t0 = draw_value(control_dist, &mut rng);
            let t1 = draw_value(test_dist, &mut rng);

            let (y0, y1, true_event_times) = if is_tte {
                let censoring = config.outcome_model.censoring.expect("validated");
                let censor_draw = Exp::new(censoring.rate).expect("validated").sample(&mut rng);
                let cutoff: f64 = censoring.admin_cutoff;
                let c = censor_draw.min(cutoff);
                (
                    Outcome::time_to_event(t0.min(c), t0 <= c)?,
                    Outcome::time_to_event(t1.min(c), t1 <= c)?,
                    Some((t0, t1)),
                )
            } else {
                let make = |v: f64, dist: OutcomeDist| -> Result<Outcome> {
                    match dist {
                        OutcomeDist::Bernoulli { .. } => Ok(Outcome::binary(v == 1.0)),
                        _ => Outcome::continuous(v),
                    }
                };
                (make(t0, control_dist)?, make(t1, test_dist)?, None)
            };

            let record = PotentialRecord {
                id: format!("s{i:06}"),
                s0,
                s1,
                y0,
                y1,
                true_event_times,
                x,
            };
            record.validate()?;
            Ok(record)
        })
        .collect();
    records
}

/// Balanced 1:1 arm assignment by seeded permutation; `floor(n/2)` subjects
/// go to the test arm.
pub fn assign_arms(n: usize, seed: u64) -> Vec<Arm> {
    use rand::seq::SliceRandom;
    let n_test = n / 2;
    let mut arms: Vec<Arm> = (0..n)
        .map(|i| if i < n_test { Arm::Test } else { Arm::Control })
        .collect();
    let mut rng = substream(derive_seed(seed, PURPOSE_ARMS), 0);
    arms.shuffle(&mut rng);
    arms
}

/// What the trial observes for one subject under assignment `z`: the
/// potential outcome of that arm, copied verbatim (consistency).
///
/// With a landmark `t~` and a time-to-event outcome, the intercurrent status
/// is unobservable when the revealed event happens before `t~`, so `s` is
/// absent for those records.
pub fn reveal(record: &PotentialRecord, z: Arm, landmark: Option<f64>) -> ObservedRecord {
    let (s, y) = match z {
        Arm::Control => (record.s0, record.y0),
        Arm::Test => (record.s1, record.y1),
    };
    let mut s = Some(s);
    if let (Some(t_tilde), Outcome::TimeToEvent { time, event }) = (landmark, y) {
        if event && time < t_tilde {
            s = None;
        }
    }
    ObservedRecord {
        id: record.id.clone(),
        z,
        s,
        y,
        x: record.x.clone(),
    }
}

/// Reveals a whole trial under the given assignment vector.
pub fn reveal_trial(
    records: &[PotentialRecord],
    arms: &[Arm],
    landmark: Option<f64>,
) -> Result<Vec<ObservedRecord>> {
    if records.len() != arms.len() {
        return Err(Error::invalid("assignment vector length mismatch"));
    }
    Ok(records
        .iter()
        .zip(arms)
        .map(|(r, z)| reveal(r, *z, landmark))
        .collect())
}

/// The estimand computed directly from potential outcomes: the contrast over
/// subjects whose stratum lies in the target set. Survival contrasts use the
/// true uncensored event times.
pub fn oracle_effect(records: &[PotentialRecord], spec: &EstimandSpec) -> Result<f64> {
    let members: Vec<&PotentialRecord> = records
        .iter()
        .filter(|r| spec.stratum.contains(classify_stratum(r.s0, r.s1)))
        .collect();
    if members.is_empty() {
        return Err(Error::EmptyStratumInSimulation);
    }
    spec.validate_for(members[0].y0.kind())?;

    match spec.contrast {
        crate::core::Contrast::SurvivalDifferenceAt { t_star } => {
            let (mut above0, mut above1) = (0usize, 0usize);
            for r in &members {
                let (t0, t1) = r
                    .true_event_times
                    .ok_or_else(|| Error::invalid("missing true event times"))?;
                if t0 > t_star {
                    above0 += 1;
                }
                if t1 > t_star {
                    above1 += 1;
                }
            }
            let n = members.len() as f64;
            Ok(above1 as f64 / n - above0 as f64 / n)
        }
        crate::core::Contrast::RmstDifference { t_star } => {
            let mut total = 0.0;
            for r in &members {
                let (t0, t1) = r
                    .true_event_times
                    .ok_or_else(|| Error::invalid("missing true event times"))?;
                total += t1.min(t_star) - t0.min(t_star);
            }
            Ok(total / members.len() as f64)
        }
        contrast => {
            let y0: Vec<f64> = members
                .iter()
                .map(|r| r.y0.numeric_value())
                .collect::<Result<_>>()?;
            let y1: Vec<f64> = members
                .iter()
                .map(|r| r.y1.numeric_value())
                .collect::<Result<_>>()?;
            contrast.combine(util::mean(&y1), util::mean(&y0))
        }
    }
}
