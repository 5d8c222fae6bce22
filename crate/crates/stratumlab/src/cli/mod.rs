//! Batch front door: dataset ingestion, analysis configuration, report and
//! plot emission, and the benchmark harness behind the `stratumlab` binary.

mod bench;
pub mod config;
mod csvio;
mod emit;
mod report;
mod run;
mod svg;

pub use bench::{benchmark, render_benchmark_text, BenchmarkReport, BenchmarkRow};
pub use config::{
    AnalysisConfig, Assumptions, BootstrapBlock, EmBlock, GridSpec, Method, MiBlock,
    RelaxationBlock, SensitivityBlock, TippingBlock, CONFIG_SCHEMA_VERSION,
};
pub use csvio::{ingest_csv, write_observed_csv, write_potential_csv, Dataset};
pub use emit::{emit, render_text};
pub use report::{
    DataSummary, MethodOutcome, OracleBlock, Report, SensitivityReport, REPORT_SCHEMA_VERSION,
};
pub use run::{run, simulate_trial, SimulatedTrial};
pub use svg::render_sensitivity_curve;

