//! Analysis configuration: a versioned JSON document declaring the estimand,
//! the assumptions the analyst is willing to defend, the methods to run, and
//! optional sensitivity and simulation blocks.
//!
//! Methods must be licensed by the declared assumptions: requesting the Wald
//! estimator without declaring monotonicity plus exclusion restriction, or a
//! principal-ignorability method without a covariate list, is a validation
//! error rather than a silent default.

use serde::{Deserialize, Serialize};

use crate::core::{Contrast, EstimandSpec, MonotonicityDirection, OutcomeKind};
use crate::error::{Error, Result};
use crate::sim::SimConfig;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Itt,
    Naive,
    Bounds,
    Cace,
    PiWeighting,
    PiStandardization,
    PiMi,
    Em,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Itt => "itt",
            Method::Naive => "naive",
            Method::Bounds => "bounds",
            Method::Cace => "cace",
            Method::PiWeighting => "pi_weighting",
            Method::PiStandardization => "pi_standardization",
            Method::PiMi => "pi_mi",
            Method::Em => "em",
        }
    }

    fn needs_pi_covariates(self) -> bool {
        matches!(
            self,
            Method::PiWeighting | Method::PiStandardization | Method::PiMi
        )
    }
}

/// Declared assumptions. Every method checks its own license at validation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Assumptions {
    /// Declared monotonicity direction, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotonicity: Option<MonotonicityDirection>,
    /// Covariates claimed to make principal ignorability hold. An empty list
    /// is an explicit intercept-only claim; absent means not declared.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub principal_ignorability_covariates: Option<Vec<String>>,
    /// Declared exclusion restriction (no effect in status-unmoved strata).
    #[serde(default)]
    pub exclusion_restriction: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapBlock {
    pub replicates: usize,
}

impl Default for BootstrapBlock {
    fn default() -> Self {
        BootstrapBlock { replicates: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiBlock {
    pub imputations: usize,
}

impl Default for MiBlock {
    fn default() -> Self {
        MiBlock { imputations: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmBlock {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for EmBlock {
    fn default() -> Self {
        EmBlock {
            restarts: 10,
            max_iter: 500,
        }
    }
}

/// Beta grid: either explicit points or an even span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Points(Vec<f64>),
    Span { min: f64, max: f64, points: usize },
}

impl GridSpec {
    pub fn materialize(&self) -> Result<Vec<f64>> {
        match self {
            GridSpec::Points(points) => Ok(points.clone()),
            GridSpec::Span { min, max, points } => {
                if *points < 2 || !(min < max) {
                    return Err(Error::config("grid span needs min < max and >= 2 points"));
                }
                let step = (max - min) / (*points as f64 - 1.0);
                Ok((0..*points).map(|i| min + step * i as f64).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TippingBlock {
    /// Defaults to 41 points on [-2, 2].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_grid: Option<GridSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationBlock {
    pub defier_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SensitivityBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tipping: Option<TippingBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotonicity_relaxation: Option<RelaxationBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariate_sets: Option<Vec<Vec<String>>>,
}

impl SensitivityBlock {
    pub fn is_empty(&self) -> bool {
        self.tipping.is_none()
            && self.monotonicity_relaxation.is_none()
            && self.covariate_sets.is_none()
    }
}

/// Root analysis configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub schema: u32,
    /// Master seed; every random stream in a run derives from it.
    pub seed: u64,
    pub estimand: EstimandSpec,
    #[serde(default)]
    pub assumptions: Assumptions,
    #[serde(default)]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub bootstrap: BootstrapBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mi: Option<MiBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub em: Option<EmBlock>,
    /// Declared outcome support, required for bounds on continuous outcomes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome_range: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<SensitivityBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimConfig>,
}

impl AnalysisConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: AnalysisConfig =
            serde_json::from_str(text).map_err(|e| Error::config(format!("cannot parse: {e}")))?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Validates internal consistency and, when the outcome kind is known,
    /// compatibility with it. Configuration errors abort a run.
    pub fn validate(&self, outcome_kind: Option<OutcomeKind>) -> Result<()> {
        if self.schema != CONFIG_SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported config schema {} (expected {CONFIG_SCHEMA_VERSION})",
                self.schema
            )));
        }
        if let Some(kind) = outcome_kind {
            self.estimand.validate_for(kind)?;
        }
        if self.bootstrap.replicates < 100 {
            return Err(Error::config("bootstrap needs at least 100 replicates"));
        }

        let survival = self.estimand.contrast.is_survival();
        for method in &self.methods {
            if survival && *method != Method::PiWeighting {
                return Err(Error::config(format!(
                    "method '{}' does not support survival contrasts; only pi_weighting does",
                    method.label()
                )));
            }
            if *method == Method::Cace {
                if self.assumptions.monotonicity.is_none() || !self.assumptions.exclusion_restriction
                {
                    return Err(Error::config(
                        "method 'cace' requires declared monotonicity and exclusion_restriction: \
                         utilized assumptions must be declared explicitly",
                    ));
                }
            }
            if method.needs_pi_covariates()
                && self.assumptions.principal_ignorability_covariates.is_none()
            {
                return Err(Error::config(format!(
                    "method '{}' requires a declared principal_ignorability_covariates list \
                     (an empty list is an explicit intercept-only claim)",
                    method.label()
                )));
            }
            if *method == Method::Bounds {
                if outcome_kind == Some(OutcomeKind::Continuous) && self.outcome_range.is_none() {
                    return Err(Error::config(
                        "bounds on a continuous outcome require outcome_range",
                    ));
                }
            }
            if *method == Method::PiMi {
                let m = self.mi.unwrap_or_default().imputations;
                if m < 2 {
                    return Err(Error::config("mi.imputations must be at least 2"));
                }
            }
        }

        if let Some(contrast @ (Contrast::RiskDifference | Contrast::RiskRatio)) =
            outcome_kind.is_some().then_some(self.estimand.contrast)
        {
            // estimand.validate_for already checked this; keep the variable
            // used for readability of the match above.
            let _ = contrast;
        }

        if let Some(sensitivity) = &self.sensitivity {
            if let Some(tipping) = &sensitivity.tipping {
                if let Some(grid) = &tipping.beta_grid {
                    let grid = grid.materialize()?;
                    if grid.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(Error::config("beta grid must be strictly increasing"));
                    }
                }
            }
            if let Some(relaxation) = &sensitivity.monotonicity_relaxation {
                if relaxation.defier_grid.is_empty() {
                    return Err(Error::config("defier_grid must be nonempty"));
                }
                if self.assumptions.monotonicity.is_none() {
                    return Err(Error::config(
                        "monotonicity_relaxation requires a declared monotonicity direction",
                    ));
                }
            }
        }

        if let Some(sim) = &self.simulation {
            sim.validate()?;
        }
        Ok(())
    }

    pub fn beta_grid(&self) -> Result<Vec<f64>> {
        match self
            .sensitivity
            .as_ref()
            .and_then(|s| s.tipping.as_ref())
            .and_then(|t| t.beta_grid.as_ref())
        {
            Some(grid) => grid.materialize(),
            None => Ok(crate::sensitivity::default_beta_grid()),
        }
    }

    pub fn pi_covariates(&self) -> Vec<String> {
        self.assumptions
            .principal_ignorability_covariates
            .clone()
            .unwrap_or_default()
    }
}
