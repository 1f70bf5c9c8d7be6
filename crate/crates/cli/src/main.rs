//! `moodwatch`: runs the comment-analysis pipeline one stage at a time.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::PipelineConfig;

#[derive(Debug, Parser)]
#[command(name = "moodwatch", version, about = "Opinion and emotion pipeline for Chinese comment streams")]
struct Cli {
    /// Pipeline config (TOML). Relative paths inside it are resolved against its directory.
    #[arg(long, global = true, default_value = "pipeline.toml")]
    config: PathBuf,
    /// Overrides the config's top-level seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Deduplicate raw comments and store cleaned documents.
    Ingest {
        /// Comment JSONL to read instead of the configured one.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Train the segmentation HMM from the space-separated corpus.
    TrainHmm,
    /// Segment documents into stopword-free tokens.
    Segment,
    /// Add SO-PMI scored words (and mined new words) to the lexicon.
    ExpandLexicon,
    /// Find n-grams that burst on the most recent day.
    MineWords,
    /// Train the Naive Bayes polarity classifier.
    TrainNb,
    /// Label every tokenized document positive or negative.
    Classify,
    /// Score the seven emotions of every document.
    Score,
    /// Aggregate daily trends and rank hot words.
    Trend,
    /// Compare the system and a baseline against hand labels.
    Eval,
}

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Malformed input data (exit 2).
    Parse(String),
    /// A required upstream artifact is absent (exit 3).
    Missing(PathBuf),
    /// Bad or unreadable config (exit 4).
    Config(String),
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Missing(_) => 3,
            CliError::Config(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse(msg) | CliError::Config(msg) | CliError::Other(msg) => f.write_str(msg),
            CliError::Missing(path) => write!(f, "missing artifact {}; run the stage that produces it first", path.display()),
        }
    }
}

impl From<moodwatch_core::Error> for CliError {
    fn from(e: moodwatch_core::Error) -> Self {
        use moodwatch_core::Error;
        match e {
            Error::Parse { .. } | Error::Json(_) | Error::InvalidInput(_) => CliError::Parse(e.to_string()),
            Error::InvalidParameter(_) => CliError::Config(e.to_string()),
            Error::NotInCorpus(_) | Error::Io(_) => CliError::Other(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = PipelineConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.paths.out = out;
    }
    config.validate()?;
    std::fs::create_dir_all(&config.paths.out)
        .map_err(|e| CliError::Other(format!("{}: {e}", config.paths.out.display())))?;
    match cli.command {
        Command::Ingest { input } => commands::ingest(&config, input.as_deref()),
        Command::TrainHmm => commands::train_hmm(&config),
        Command::Segment => commands::segment(&config),
        Command::ExpandLexicon => commands::expand_lexicon(&config),
        Command::MineWords => commands::mine_words(&config),
        Command::TrainNb => commands::train_nb(&config),
        Command::Classify => commands::classify(&config),
        Command::Score => commands::score(&config),
        Command::Trend => commands::trend(&config),
        Command::Eval => commands::eval(&config),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("moodwatch: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
