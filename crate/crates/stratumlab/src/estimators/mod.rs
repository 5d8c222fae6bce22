//! Assumption-indexed estimators for principal-stratum contrasts, plus the
//! shared regression and bootstrap machinery.

pub mod bootstrap;
mod bounds;
mod cace;
mod em;
pub mod glm;
mod naive;
mod pi;

pub use bootstrap::{bootstrap_ci, BootstrapConfig, BootstrapSummary};
pub use bounds::{trimming_bounds, BoundsResult};
pub use cace::wald_cace;
pub use em::{em_mixture, ComponentParams, EmOptions, MixtureFit};
pub use glm::{fit_logistic, DesignMatrix, PropensityModel, PROPENSITY_CLIP};
pub use naive::naive_conditioning;
pub use pi::{
    pi_multiple_imputation, pi_multiple_imputation_with_model, pi_standardization, pi_weighting,
};

pub(crate) use bounds::cell_bounds_with_proportions;
pub(crate) use pi::{fit_status_propensity, resolve_defining_status, weighting_statistic};
