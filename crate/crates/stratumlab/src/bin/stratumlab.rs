//! Thin command-line front end over the `stratumlab` library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stratumlab::cli::{self, AnalysisConfig};

#[derive(Parser)]
#[command(
    name = "stratumlab",
    about = "Principal-stratum estimands for randomized trials",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Analysis configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output stem; files are written as <stem>.json, <stem>.txt, ...
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a trial: write the observed CSV and the potential-outcomes
    /// oracle sidecar (never read by `analyze`).
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Analyze a dataset (or the configured simulation when --data is
    /// omitted) with every configured method and sensitivity block.
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        /// Observed-records CSV; omit to simulate in-process.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run only the sensitivity blocks of the configuration.
    Sensitivity {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Repeat simulate-and-analyze over derived seeds and tabulate bias and
    /// coverage per method against the per-replicate oracle.
    Benchmark {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of simulate-and-analyze replicates.
        #[arg(long, default_value_t = 100)]
        replicates: usize,
    },
}

fn load_config(common: &CommonArgs) -> stratumlab::Result<AnalysisConfig> {
    let mut config = AnalysisConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn cmd_simulate(common: &CommonArgs) -> stratumlab::Result<()> {
    let config = load_config(common)?;
    config.validate(None)?;
    let trial = cli::simulate_trial(&config)?;

    let data_path = common.out.with_extension("csv");
    cli::write_observed_csv(&data_path, &trial.observed)?;
    let oracle_path = oracle_sidecar_path(&common.out);
    cli::write_potential_csv(&oracle_path, &trial.potentials)?;

    println!(
        "simulated {} subjects -> {} (+ oracle sidecar {})",
        trial.observed.len(),
        data_path.display(),
        oracle_path.display()
    );
    Ok(())
}

fn oracle_sidecar_path(stem: &std::path::Path) -> PathBuf {
    let mut name = stem
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push_str("_oracle.csv");
    stem.with_file_name(name)
}

fn cmd_analyze(common: &CommonArgs, data: &Option<PathBuf>, scans_only: bool) -> stratumlab::Result<()> {
    let mut config = load_config(common)?;
    if scans_only {
        config.methods.clear();
    }
    let dataset = match data {
        Some(path) => {
            let dataset = cli::ingest_csv(path)?;
            for warning in &dataset.warnings {
                eprintln!("warning: {warning}");
            }
            Some(dataset)
        }
        None => None,
    };
    let report = cli::run(&config, dataset)?;
    let files = cli::emit(&report, &common.out)?;
    for file in &files {
        println!("wrote {}", file.display());
    }
    println!(
        "summary: {} of {} methods failed",
        report.method_failures(),
        report.estimates.len()
    );
    Ok(())
}

fn cmd_benchmark(common: &CommonArgs, replicates: usize) -> stratumlab::Result<()> {
    let config = load_config(common)?;
    let report = cli::benchmark(&config, replicates)?;

    let json_path = common.out.with_extension("json");
    std::fs::write(&json_path, report.to_canonical_json()?)?;
    let txt_path = common.out.with_extension("txt");
    let text = cli::render_benchmark_text(&report);
    std::fs::write(&txt_path, &text)?;

    print!("{text}");
    println!("wrote {} and {}", json_path.display(), txt_path.display());
    Ok(())
}

fn configure_threads() {
    if let Ok(value) = std::env::var("STRATUMLAB_THREADS") {
        match value.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring invalid STRATUMLAB_THREADS='{value}'"),
        }
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common } => cmd_simulate(common),
        Command::Analyze { common, data } => cmd_analyze(common, data, false),
        Command::Sensitivity { common, data } => cmd_analyze(common, data, true),
        Command::Benchmark { common, replicates } => cmd_benchmark(common, *replicates),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
