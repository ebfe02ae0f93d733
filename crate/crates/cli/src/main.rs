mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use modwatch_core::corpus::CorpusError;
use modwatch_core::distance::DistanceError;
use modwatch_core::features::FeatureError;
use modwatch_core::impact::ImpactError;
use modwatch_core::models::ModelError;
use modwatch_core::vectors::VectorError;
use modwatch_service::ServiceError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error("vectors: {0}")]
    Vector(#[from] VectorError),
    #[error("distance: {0}")]
    Distance(#[from] DistanceError),
    #[error("features: {0}")]
    Feature(#[from] FeatureError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("impact: {0}")]
    Impact(#[from] ImpactError),
    #[error("service: {0}")]
    Service(#[from] ServiceError),
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Io(_) => "io",
            Self::Json(_) => "json",
            Self::Csv(_) => "csv",
            Self::Corpus(_) => "corpus",
            Self::Vector(_) => "vectors",
            Self::Distance(_) => "distance",
            Self::Feature(_) => "features",
            Self::Model(_) => "model",
            Self::Impact(_) => "impact",
            Self::Service(e) => e.code(),
        }
    }
}

/// Moderation analytics: community evolution, intervention prediction and impact.
#[derive(Debug, Parser)]
#[command(name = "modwatch", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// TOML run configuration; defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic corpus with planted problematic communities.
    Generate(commands::GenerateArgs),
    /// Load and validate the corpus, reporting skipped records.
    Ingest,
    /// Build state vectors and write them as sidecar files.
    Vectorize(commands::VectorizeArgs),
    /// Consecutive-month RBO distance series and the KS comparison.
    Distances(commands::DistancesArgs),
    /// Extract quarter feature rows for every community.
    Features,
    /// Cross-validate and fit a model on one quarter window.
    Train(commands::TrainArgs),
    /// Score a saved model on a feature table.
    Evaluate(commands::EvaluateArgs),
    /// Month-by-month deployment simulation with false-negative feedback.
    Simulate(commands::SimulateArgs),
    /// Event-aligned outcome series for joiners of a community against matched controls.
    Impact(commands::ImpactArgs),
    /// Run the review service over HTTP.
    Serve(commands::ServeArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MODWATCH_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let msg = serde_json::json!({"code": "usage", "message": e.to_string().trim_end()});
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
        Err(e) => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = serde_json::json!({"code": e.code(), "message": e.to_string()});
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = config::RunConfig::load(cli.global.config.as_deref())?;
    if let Some(seed) = cli.global.seed {
        config.seed = seed;
    }
    let out = cli.global.out;
    match cli.command {
        Command::Generate(a) => commands::generate(config, a, &out),
        Command::Ingest => commands::ingest(config, &out),
        Command::Vectorize(a) => commands::vectorize(config, a, &out),
        Command::Distances(a) => commands::distances(config, a, &out),
        Command::Features => commands::features(config, &out),
        Command::Train(a) => commands::train(config, a, &out),
        Command::Evaluate(a) => commands::evaluate(config, a, &out),
        Command::Simulate(a) => commands::simulate(config, a, &out),
        Command::Impact(a) => commands::impact(config, a, &out),
        Command::Serve(a) => commands::serve(config, a),
    }
}
