//! Command-line entry point.
//!
//! `moodpulse <subcommand> --config <file>` runs one pipeline stage (or the
//! whole pipeline) against the artifact directory named in the config. Exit
//! codes: 0 success, 2 configuration error, 3..9 stage failures in pipeline
//! order.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use moodpulse::config::{Overrides, PipelineConfig, TtestChoice};
use moodpulse::pipeline::{run_pipeline, CliError, Stage};
use moodpulse::stages;

#[derive(Parser)]
#[command(
    name = "moodpulse",
    version,
    about = "Detect, measure, and explain collective affect shifts in a text corpus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and preprocess the corpus into preprocessed.jsonl.
    Ingest(CommonArgs),
    /// Label every post and write labels.csv.
    Label(CommonArgs),
    /// Build daily fraction series and write timeseries.csv.
    Series(CommonArgs),
    /// Detect change points and write changepoints.json.
    Detect(CommonArgs),
    /// Measure short- and long-term reactions into reactions.json.
    Measure(CommonArgs),
    /// Extract before/after topics into topics.json.
    Explain(CommonArgs),
    /// Group events, apply verdicts, and write eval.json.
    Evaluate(CommonArgs),
    /// Export plot-ready CSVs from existing artifacts.
    Report(CommonArgs),
    /// Run the whole pipeline and write the run manifest.
    Run(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Pipeline TOML config.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Drop day-exact duplicate posts during ingest.
    #[arg(long)]
    dedupe_exact: bool,
    /// Long-term test kind.
    #[arg(long, value_enum)]
    ttest: Option<TtestChoice>,
    /// Requested topics per explanation window.
    #[arg(long)]
    n_topics: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    let (args, action) = match command {
        Command::Ingest(args) => (args, Action::Stage(Stage::Ingest)),
        Command::Label(args) => (args, Action::Stage(Stage::Label)),
        Command::Series(args) => (args, Action::Stage(Stage::Series)),
        Command::Detect(args) => (args, Action::Stage(Stage::Detect)),
        Command::Measure(args) => (args, Action::Stage(Stage::Measure)),
        Command::Explain(args) => (args, Action::Stage(Stage::Explain)),
        Command::Evaluate(args) => (args, Action::Stage(Stage::Evaluate)),
        Command::Report(args) => (args, Action::Report),
        Command::Run(args) => (args, Action::Run),
    };
    let overrides = Overrides {
        seed: args.seed,
        out: args.out.clone(),
        dedupe_exact: args.dedupe_exact,
        ttest: args.ttest,
        n_topics: args.n_topics,
    };
    let config = PipelineConfig::load(&args.config, &overrides).map_err(CliError::Config)?;
    match action {
        Action::Run => run_pipeline(&config),
        Action::Report => {
            stages::run_report(&config, &config.paths.output).map_err(CliError::Report)
        }
        Action::Stage(stage) => {
            fs::create_dir_all(&config.paths.output)
                .map_err(|e| CliError::Config(e.into()))?;
            stage
                .run(&config, &config.paths.output)
                .map_err(|err| CliError::Stage(stage, err))
        }
    }
}

enum Action {
    Stage(Stage),
    Report,
    Run,
}
