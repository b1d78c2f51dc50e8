//! `encsum`: legal case retrieval pipeline front-end.
//!
//! Every stage is a subcommand reading one run-config file; flags override
//! individual settings. Exit codes: 0 success, 2 configuration error,
//! 3 data or artifact error, 4 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod pipeline;

use config::load_config;
use pipeline::{RankerOverrides, ScorerOverrides};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Numeric(_) => "numeric",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "encsum",
    version,
    about = "Legal case retrieval: phrase scoring, encoded summaries, lexical matching, ranking"
)]
struct Cli {
    /// Report errors as JSON on stderr.
    #[arg(long, global = true)]
    json_errors: bool,
    /// Worker threads for data-parallel sections; 1 keeps runs exactly
    /// reproducible (outputs are identical at any thread count).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the seeded synthetic corpus (cases, embeddings, manifest, splits).
    GenCorpus {
        /// Run config supplying the [synth] section.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Corpus directory; defaults to the configured manifest's directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the phrase scorer and write scorer.ckpt plus train-loss.csv.
    TrainScorer {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Write extractive summaries (summaries.jsonl) using the trained scorer.
    Summarize {
        #[arg(long)]
        config: PathBuf,
        /// Length threshold t in (0, 1].
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Encode every document into a vector (encodings.jsonl).
    Encode {
        #[arg(long)]
        config: PathBuf,
    },
    /// Build lexical + latent-product feature rows (features.jsonl).
    Featurize {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train the pairwise ranker on labeled groups and write ranker.ckpt.
    TrainRanker {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reg_c: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Rank candidates with a trained ranker (predictions.tsv).
    Rank {
        #[arg(long)]
        config: PathBuf,
        /// Candidates marked predicted=1 per query.
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Leave-one-out retrieval report and ROUGE table (report.json/.txt).
    Evaluate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare analytic gradients against finite differences on tiny models.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = cli.threads.max(1);
    match cli.command {
        Command::GenCorpus { config, out, seed } => {
            let config = config.map(|path| load_config(&path)).transpose()?;
            pipeline::gen_corpus(config, out, seed)
        }
        Command::TrainScorer { config, epochs, seed, learning_rate } => {
            let config = load_config(&config)?;
            pipeline::train_scorer(config, ScorerOverrides { epochs, seed, learning_rate })
        }
        Command::Summarize { config, threshold } => {
            let config = load_config(&config)?;
            pipeline::summarize(config, threshold, threads)
        }
        Command::Encode { config } => {
            let config = load_config(&config)?;
            pipeline::encode_documents(config, threads)
        }
        Command::Featurize { config } => {
            let config = load_config(&config)?;
            pipeline::featurize(config, threads)
        }
        Command::TrainRanker { config, seed, reg_c, epochs } => {
            let config = load_config(&config)?;
            pipeline::train_ranker(config, RankerOverrides { seed, reg_c, epochs })
        }
        Command::Rank { config, top_k } => {
            let config = load_config(&config)?;
            pipeline::rank(config, top_k)
        }
        Command::Evaluate { config } => {
            let config = load_config(&config)?;
            pipeline::evaluate(config, threads)
        }
        Command::Gradcheck { seeds, tolerance } => pipeline::gradcheck(seeds, tolerance),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json_errors = cli.json_errors;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if json_errors {
                let payload = serde_json::json!({
                    "error": { "kind": err.kind(), "message": err.to_string() }
                });
                eprintln!("{payload}");
            } else {
                eprintln!("error: {err}");
            }
            ExitCode::from(err.exit_code())
        }
    }
}
