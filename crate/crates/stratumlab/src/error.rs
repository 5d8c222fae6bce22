//! Crate-wide error type.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("arm has no records: {arm}")]
    EmptyArm { arm: &'static str },

    #[error("undefined ratio: denominator is zero")]
    UndefinedRatio,

    #[error("monotonicity contradicted by data: implied proportion {implied:.6e} is negative")]
    MonotonicityContradicted { implied: f64 },

    #[error("separation: propensity not identified")]
    Separation,

    #[error("design matrix is collinear or singular")]
    SingularDesign,

    #[error("stratum empty on {arm} arm")]
    StratumEmptyOnArm { arm: &'static str },

    #[error("unbounded continuous outcome without declared range")]
    MissingOutcomeRange,

    #[error("treatment does not move S; CACE not identified")]
    CaceNotIdentified,

    #[error("positivity violated in cell {cell}")]
    PositivityViolated { cell: String },

    #[error("target stratum vanishes in fit (proportion {proportion:.3e})")]
    TargetStratumVanishes { proportion: f64 },

    #[error("EM did not converge in any of {restarts} restarts")]
    EmNotConverged {
        restarts: usize,
        traces: Vec<Vec<f64>>,
    },

    #[error("bootstrap unstable for this statistic: {failures} of {total} resamples failed")]
    BootstrapUnstable { failures: usize, total: usize },

    #[error("t* exceeds follow-up")]
    TStarExceedsFollowUp,

    #[error("intercurrent status missing after landmark (record {id})")]
    StatusMissingAfterLandmark { id: String },

    #[error("landmark {landmark} exceeds every observed time; restriction is empty")]
    EmptyAfterLandmark { landmark: f64 },

    #[error("target stratum empty in simulated population")]
    EmptyStratumInSimulation,

    #[error("row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
