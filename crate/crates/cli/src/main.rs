//! `crossmoments`: level-crossing moment experiments from a JSON config.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crossmoments::validation::{Scale, ValidationConfig};

use config::{ExperimentConfig, Overrides};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Run(String),
}

impl From<crossmoments::Error> for CliError {
    fn from(e: crossmoments::Error) -> Self {
        match e {
            crossmoments::Error::InvalidParameter(m) => CliError::Config(m),
            e => CliError::Run(e.to_string()),
        }
    }
}

const EXIT_HELP: &str = "Exit codes: 0 success, 1 validation or run failure, 2 config error, \
3 inconclusive classification, 4 certified divergence.\n\
Environment: CROSSMOMENTS_THREADS caps the number of worker threads.";

const MOMENTS_HELP: &str = "Writes moments.json and integrand.csv to the output directory.\n\
integrand.csv columns, 1D: level_index,tau,value,mu1,sigma2,correlation,abs_moment,density\n\
integrand.csv columns, 2D: level_index,r,value,kernel,density,a,a_se,sigma2_max,cs_bound\n\
(value is the integrand; correlation is empty when sigma2 = 0)";

const SIMULATE_HELP: &str = "Writes ensemble.csv and aggregate.json to the output directory.\n\
ensemble.csv columns: replicate_id,level_index,delta,value (one row per replicate, level and grid spacing)";

#[derive(Parser)]
#[command(name = "crossmoments", version, about = "Second moments of level crossings: Kac-Rice quadrature, convergence classification and Monte Carlo", after_help = EXIT_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment config
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides monte_carlo.seed)
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo replicates (overrides monte_carlo.replicates)
    #[arg(long)]
    replicates: Option<usize>,
    /// Grid intervals (overrides monte_carlo.resolution)
    #[arg(long)]
    resolution: Option<usize>,
    /// Output directory (overrides output.dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the JSON report instead of a summary
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the small-lag convergence of a process model
    Geman(Common),
    /// Kac-Rice moments of crossings, planar roots or level-curve length
    #[command(after_help = MOMENTS_HELP)]
    Moments(Common),
    /// Monte Carlo ensemble of counts or lengths
    #[command(after_help = SIMULATE_HELP)]
    Simulate(Common),
    /// Run the validation suite and print a pass/fail table
    Validate {
        /// Only run the checks of one group (e.g. geman) or one criterion number
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Run the planar checks and the divergence signature at full size
        #[arg(long)]
        full: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        /// Multiplies every tolerance (test hook)
        #[arg(long, hide = true, default_value_t = 1.0)]
        tolerance_scale: f64,
    },
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("CROSSMOMENTS_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("CROSSMOMENTS_THREADS: expected a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Run(e.to_string()))?;
    }
    Ok(())
}

fn load(c: &Common) -> Result<ExperimentConfig, CliError> {
    let o = Overrides { seed: c.seed, replicates: c.replicates, resolution: c.resolution, out: c.out.clone() };
    ExperimentConfig::load(c.config.as_deref(), &o)
}

fn run(cli: Cli) -> Result<i32, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Geman(c) => commands::geman(&load(&c)?, c.json),
        Command::Moments(c) => commands::moments(&load(&c)?, c.json),
        Command::Simulate(c) => commands::simulate(&load(&c)?, c.json),
        Command::Validate { filter, seed, full, out, json, tolerance_scale } => {
            let scale = if full { Scale::Full } else { Scale::Desk };
            commands::validate(&ValidationConfig { seed, filter, scale, tolerance_scale }, &out, json)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                CliError::Config(_) => 2,
                CliError::Run(_) => 1,
            })
        }
    }
}
