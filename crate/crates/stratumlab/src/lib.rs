//! Principal-stratum estimands for randomized trials.
//!
//! A randomized trial identifies the average effect of assignment, but
//! questions about subjects classified by a post-randomization event (an
//! intercurrent event) need more: conditioning each arm on the observed event
//! compares differently selected populations and is not a causal contrast.
//! This crate works with the strata defined by the joint potential statuses
//! `(S(0), S(1))`, which are fixed attributes of each subject, and estimates
//! stratum-specific effects under explicitly declared assumptions:
//!
//! - [`core`] — domain types, stratum algebra, estimand specifications, the
//!   intention-to-treat benchmark, and the stratum proportions implied by
//!   monotonicity;
//! - [`sim`] — a potential-outcomes simulator whose generated truths serve
//!   as the oracle for every estimator;
//! - [`estimators`] — identification bounds, the Wald estimator under
//!   monotonicity plus exclusion restriction, weighting / standardization /
//!   multiple imputation under principal ignorability, and a joint mixture
//!   model fitted by EM;
//! - [`survival`] — weighted product-limit curves, survival and restricted
//!   mean survival time contrasts, and landmark handling for time-to-event
//!   outcomes;
//! - [`sensitivity`] — tipping-point scans over unverifiable-assumption
//!   parameters, monotonicity relaxation, and covariate-set scans;
//! - [`cli`] — dataset ingestion, analysis configuration, report and plot
//!   emission for the `stratumlab` binary.
//!
//! The runnable examples under `examples/` walk through each capability; the
//! acceptance suite in `tests/acceptance.rs` checks the estimators against
//! the simulator's oracle.

pub mod cli;
pub mod core;
pub mod error;
pub mod estimators;
pub mod rng;
pub mod sensitivity;
pub mod sim;
pub mod survival;
mod util;

pub use crate::core::{
    classify_stratum, itt_effect, stratum_proportions_monotone, Arm, Contrast, CovariateSchema,
    CovariateValue, CovariateVector, EstimandSpec, EstimateResult, MonotonicityDirection,
    ObservedRecord, Outcome, OutcomeKind, PotentialRecord, PrincipalStratum, StratumSet,
};
pub use crate::error::{Error, Result};
pub use crate::estimators::BootstrapConfig;
