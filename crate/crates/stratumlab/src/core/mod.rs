//! Domain types, principal-stratum algebra, estimand specifications, and the
//! assumption-free intention-to-treat benchmark.

mod itt;
mod types;

pub use itt::{itt_effect, stratum_proportions_monotone, MONOTONICITY_TOLERANCE};
pub use types::{
    classify_stratum, Arm, ColumnKind, Contrast, CovariateColumn, CovariateSchema, CovariateValue,
    CovariateVector, EstimandSpec, EstimateResult, MonotonicityDirection, ObservedRecord, Outcome,
    OutcomeKind, PotentialRecord, PrincipalStratum, StratumSet,
};

pub(crate) use itt::{check_uniform_outcome_kind, proportions_with_defier, status_rate};
