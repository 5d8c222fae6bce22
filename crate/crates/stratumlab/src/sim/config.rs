//! Simulator configuration: stratum membership model, covariate generators,
//! and per-(stratum, arm) outcome distributions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::core::PrincipalStratum;
use crate::error::{Error, Result};

const PROPORTION_TOLERANCE: f64 = 1e-9;

/// One value per (stratum cell, arm), serialized as
/// `{ "<cell>": { "control": ..., "test": ... }, ... }`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerStratumArm<T> {
    values: [[T; 2]; 4],
}

impl<T: Clone> PerStratumArm<T> {
    pub fn from_fn(f: impl FnMut(PrincipalStratum, crate::core::Arm) -> T) -> Self {
        let make = |cell: PrincipalStratum, f: &mut dyn FnMut(PrincipalStratum, crate::core::Arm) -> T| {
            [
                f(cell, crate::core::Arm::Control),
                f(cell, crate::core::Arm::Test),
            ]
        };
        let mut g = f;
        PerStratumArm {
            values: [
                make(PrincipalStratum::ALL[0], &mut g),
                make(PrincipalStratum::ALL[1], &mut g),
                make(PrincipalStratum::ALL[2], &mut g),
                make(PrincipalStratum::ALL[3], &mut g),
            ],
        }
    }

    pub fn get(&self, cell: PrincipalStratum, arm: crate::core::Arm) -> &T {
        &self.values[cell.index()][arm.as_binary() as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (PrincipalStratum, crate::core::Arm, &T)> {
        PrincipalStratum::ALL.into_iter().flat_map(move |cell| {
            crate::core::Arm::BOTH
                .into_iter()
                .map(move |arm| (cell, arm, self.get(cell, arm)))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ArmPair<T> {
    control: T,
    test: T,
}

impl<T: Serialize + Clone> Serialize for PerStratumArm<T> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = BTreeMap::new();
        for cell in PrincipalStratum::ALL {
            map.insert(
                cell.name(),
                ArmPair {
                    control: self.get(cell, crate::core::Arm::Control).clone(),
                    test: self.get(cell, crate::core::Arm::Test).clone(),
                },
            );
        }
        map.serialize(serializer)
    }
}

impl<'de, T: Deserialize<'de> + Clone> Deserialize<'de> for PerStratumArm<T> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let map: BTreeMap<String, ArmPair<T>> = BTreeMap::deserialize(deserializer)?;
        let mut slots: [[Option<T>; 2]; 4] = Default::default();
        for (key, pair) in map {
            let cell = PrincipalStratum::parse(&key).map_err(serde::de::Error::custom)?;
            slots[cell.index()][0] = Some(pair.control);
            slots[cell.index()][1] = Some(pair.test);
        }
        let mut values: Vec<[T; 2]> = Vec::with_capacity(4);
        for (i, slot) in slots.into_iter().enumerate() {
            match slot {
                [Some(c), Some(t)] => values.push([c, t]),
                _ => {
                    return Err(serde::de::Error::custom(format!(
                        "missing outcome distributions for cell '{}'",
                        PrincipalStratum::ALL[i].name()
                    )))
                }
            }
        }
        let values: [[T; 2]; 4] = values
            .try_into()
            .map_err(|_| serde::de::Error::custom("expected four cells"))?;
        Ok(PerStratumArm { values })
    }
}

/// How stratum membership is generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum StratumModel {
    /// Fixed cell probabilities in the canonical order
    /// `[event_both, event_control_only, event_neither, event_test_only]`.
    FixedProportions { proportions: [f64; 4] },
    /// Multinomial-logistic membership in the covariates. One coefficient
    /// vector per non-reference cell (reference: `event_neither`), aligned to
    /// intercept followed by the expanded covariate columns.
    MultinomialLogistic {
        coefficients: BTreeMap<String, Vec<f64>>,
    },
}

/// Reference cell of the multinomial-logistic stratum model.
pub const REFERENCE_CELL: PrincipalStratum = PrincipalStratum::EventNeither;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalLevel {
    pub level: String,
    pub prob: f64,
}

/// Baseline covariate generators, drawn independently per subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CovariateGenerator {
    Categorical {
        name: String,
        levels: Vec<CategoricalLevel>,
    },
    /// Normal with the given location and scale.
    Continuous { name: String, mean: f64, sd: f64 },
}

impl CovariateGenerator {
    pub fn name(&self) -> &str {
        match self {
            CovariateGenerator::Categorical { name, .. } => name,
            CovariateGenerator::Continuous { name, .. } => name,
        }
    }

    /// Expanded design columns this generator contributes, mirroring the
    /// reference coding of `CovariateSchema` (levels sorted alphabetically,
    /// first level is the reference).
    pub(crate) fn expanded_width(&self) -> usize {
        match self {
            CovariateGenerator::Categorical { levels, .. } => levels.len().saturating_sub(1),
            CovariateGenerator::Continuous { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum OutcomeDist {
    Bernoulli { p: f64 },
    Normal { mean: f64, sd: f64 },
    Exponential { rate: f64 },
}

impl OutcomeDist {
    pub(crate) fn kind_name(&self) -> &'static str {
        match self {
            OutcomeDist::Bernoulli { .. } => "bernoulli",
            OutcomeDist::Normal { .. } => "normal",
            OutcomeDist::Exponential { .. } => "exponential",
        }
    }
}

/// Independent exponential censoring with an administrative cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Censoring {
    pub rate: f64,
    pub admin_cutoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub distributions: PerStratumArm<OutcomeDist>,
    /// Required exactly for time-to-event (exponential) outcomes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub censoring: Option<Censoring>,
}

/// Full generating configuration for one synthetic trial.
///
/// With `pi_violation_beta == 0` the construction satisfies principal
/// ignorability whenever the stratum model makes `S(0)` and `S(1)`
/// independent given the covariates and the control-arm outcome law does not
/// depend on `S(1)` within `S(0)`. A nonzero beta exponentially tilts the
/// control-arm outcome draw by `exp(beta * y)` inside the strata with
/// `S(1) = 1`, which is exactly the selection model the tipping scan varies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub stratum_model: StratumModel,
    pub covariates: Vec<CovariateGenerator>,
    pub outcome_model: OutcomeModel,
    #[serde(default)]
    pub pi_violation_beta: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        match &self.stratum_model {
            StratumModel::FixedProportions { proportions } => {
                for p in proportions {
                    if !(0.0..=1.0).contains(p) {
                        return Err(Error::config(format!(
                            "stratum proportion {p} outside [0, 1]"
                        )));
                    }
                }
                let total: f64 = proportions.iter().sum();
                if (total - 1.0).abs() > PROPORTION_TOLERANCE {
                    return Err(Error::config(format!(
                        "stratum proportions sum to {total}, expected 1"
                    )));
                }
            }
            StratumModel::MultinomialLogistic { coefficients } => {
                let width = 1 + self
                    .covariates
                    .iter()
                    .map(|g| g.expanded_width())
                    .sum::<usize>();
                let expected: Vec<&str> = PrincipalStratum::ALL
                    .iter()
                    .filter(|c| **c != REFERENCE_CELL)
                    .map(|c| c.name())
                    .collect();
                for name in &expected {
                    match coefficients.get(*name) {
                        None => {
                            return Err(Error::config(format!(
                                "multinomial stratum model is missing coefficients for '{name}'"
                            )))
                        }
                        Some(beta) if beta.len() != width => {
                            return Err(Error::config(format!(
                                "coefficients for '{name}' have length {}, expected {width} \
                                 (intercept + expanded covariates)",
                                beta.len()
                            )))
                        }
                        Some(_) => {}
                    }
                }
                for key in coefficients.keys() {
                    if !expected.contains(&key.as_str()) {
                        return Err(Error::config(format!(
                            "unexpected coefficient key '{key}' (reference cell is '{}')",
                            REFERENCE_CELL.name()
                        )));
                    }
                }
            }
        }

        let mut names = std::collections::BTreeSet::new();
        for generator in &self.covariates {
            if !names.insert(generator.name().to_string()) {
                return Err(Error::config(format!(
                    "duplicate covariate name '{}'",
                    generator.name()
                )));
            }
            match generator {
                CovariateGenerator::Categorical { name, levels } => {
                    if levels.is_empty() {
                        return Err(Error::config(format!(
                            "categorical covariate '{name}' has no levels"
                        )));
                    }
                    let mut level_names = std::collections::BTreeSet::new();
                    let mut total = 0.0;
                    for level in levels {
                        if !(0.0..=1.0).contains(&level.prob) {
                            return Err(Error::config(format!(
                                "level probability {} of '{name}' outside [0, 1]",
                                level.prob
                            )));
                        }
                        if !level_names.insert(level.level.clone()) {
                            return Err(Error::config(format!(
                                "duplicate level '{}' of covariate '{name}'",
                                level.level
                            )));
                        }
                        total += level.prob;
                    }
                    if (total - 1.0).abs() > PROPORTION_TOLERANCE {
                        return Err(Error::config(format!(
                            "level probabilities of '{name}' sum to {total}, expected 1"
                        )));
                    }
                }
                CovariateGenerator::Continuous { name, sd, .. } => {
                    if *sd <= 0.0 {
                        return Err(Error::config(format!(
                            "scale of covariate '{name}' must be positive"
                        )));
                    }
                }
            }
        }

        let mut kind: Option<&'static str> = None;
        for (cell, arm, dist) in self.outcome_model.distributions.iter() {
            match kind {
                None => kind = Some(dist.kind_name()),
                Some(k) if k == dist.kind_name() => {}
                Some(k) => {
                    return Err(Error::config(format!(
                        "outcome distributions mix kinds ({k} and {})",
                        dist.kind_name()
                    )))
                }
            }
            match dist {
                OutcomeDist::Bernoulli { p } => {
                    if !(0.0..=1.0).contains(p) {
                        return Err(Error::config(format!(
                            "Bernoulli probability {p} for ({}, {arm}) outside [0, 1]",
                            cell.name()
                        )));
                    }
                }
                OutcomeDist::Normal { sd, .. } => {
                    if *sd <= 0.0 {
                        return Err(Error::config("normal outcome scale must be positive"));
                    }
                }
                OutcomeDist::Exponential { rate } => {
                    if *rate <= 0.0 {
                        return Err(Error::config("exponential rate must be positive"));
                    }
                }
            }
        }

        let is_tte = kind == Some("exponential");
        match (&self.outcome_model.censoring, is_tte) {
            (Some(_), false) => {
                return Err(Error::config(
                    "censoring applies only to time-to-event (exponential) outcomes",
                ))
            }
            (None, true) => {
                return Err(Error::config(
                    "time-to-event outcomes need a censoring block (rate and admin_cutoff)",
                ))
            }
            (Some(c), true) => {
                if c.rate <= 0.0 || c.admin_cutoff <= 0.0 {
                    return Err(Error::config(
                        "censoring rate and administrative cutoff must be positive",
                    ));
                }
            }
            (None, false) => {}
        }

        // The exponential tilt must keep tilted rates positive.
        if self.pi_violation_beta != 0.0 && is_tte {
            for (cell, _, dist) in self.outcome_model.distributions.iter() {
                let (_, s1) = cell.statuses();
                if s1 {
                    if let OutcomeDist::Exponential { rate } = dist {
                        if rate - self.pi_violation_beta <= 0.0 {
                            return Err(Error::config(format!(
                                "pi_violation_beta {} reaches the exponential rate {rate} of \
                                 cell '{}'; the tilted control rate would not be positive",
                                self.pi_violation_beta,
                                cell.name()
                            )));
                        }
                    }
                }
            }
        }
        if !self.pi_violation_beta.is_finite() {
            return Err(Error::config("pi_violation_beta must be finite"));
        }
        Ok(())
    }

    /// Outcome kind this configuration generates.
    pub fn outcome_kind(&self) -> crate::core::OutcomeKind {
        match self
            .outcome_model
            .distributions
            .get(PrincipalStratum::EventBoth, crate::core::Arm::Control)
        {
            OutcomeDist::Bernoulli { .. } => crate::core::OutcomeKind::Binary,
            OutcomeDist::Normal { .. } => crate::core::OutcomeKind::Continuous,
            OutcomeDist::Exponential { .. } => crate::core::OutcomeKind::TimeToEvent,
        }
    }
}
