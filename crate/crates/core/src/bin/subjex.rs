use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use subject_ensemble::cli::config::ENV_API_KEY;
use subject_ensemble::cli::{execute, exit_code, load_config, Command, ExecOptions};
use subject_ensemble::evaluation::GroupBy;

/// LLM-ensemble subject indexing against a controlled vocabulary.
///
/// Endpoints can be overridden with SUBJEX_LLM_ENDPOINT, SUBJEX_RANK_ENDPOINT
/// and SUBJEX_EMBED_ENDPOINT; SUBJEX_API_KEY is sent as a bearer token.
/// Exit codes: 0 success, 1 invalid input or config, 2 missing prerequisite
/// stage, 3 backend failure.
#[derive(Parser)]
#[command(name = "subjex", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(short, long, global = true, default_value = "subjex.toml")]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override combine.alpha.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Override mapping.threshold.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Override mapping.hybrid_weight.
    #[arg(long, global = true)]
    hybrid_weight: Option<f64>,
    /// Use artifacts recorded under a different config hash.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Group {
    Language,
    RecordType,
}

#[derive(Subcommand)]
enum Cmd {
    /// Copy (or sample) the document and training corpora into the run directory.
    Ingest,
    /// Embed the vocabulary and write the index snapshot.
    BuildIndex,
    /// Generate keywords for every ensemble member and document (resumable).
    Complete,
    /// Map generated keywords onto vocabulary concepts.
    Map,
    /// Aggregate member similarities into ensemble scores.
    Summarise,
    /// Ask the ranking model for the relevance of every suggestion.
    Rank,
    /// Combine ensemble and relevance scores and keep target concepts.
    Combine,
    /// Run every stage, reusing artifacts that are up to date.
    Run,
    /// Select an ensemble subset by PR-AUC on cached stage outputs.
    Optimize {
        /// Records with gold labels; defaults to the ingested documents.
        #[arg(long)]
        gold: Option<PathBuf>,
    },
    /// Precision, recall and F1 at k plus PR-AUC of the final suggestions.
    Evaluate {
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Additionally report per language or record type.
        #[arg(long, value_enum)]
        group_by: Option<Group>,
        /// Write the precision-recall curve as CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// PR-AUC over the configured alpha values, from cached scores.
    SweepAlpha {
        #[arg(long)]
        gold: Option<PathBuf>,
    },
    /// Concept and label counts of the vocabulary.
    VocabStats,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Ingest => Command::Ingest,
            Cmd::BuildIndex => Command::BuildIndex,
            Cmd::Complete => Command::Complete,
            Cmd::Map => Command::Map,
            Cmd::Summarise => Command::Summarise,
            Cmd::Rank => Command::Rank,
            Cmd::Combine => Command::Combine,
            Cmd::Run => Command::Run,
            Cmd::Optimize { gold } => Command::Optimize { gold },
            Cmd::Evaluate { gold, group_by, curve } => Command::Evaluate {
                gold,
                group_by: group_by.map(|g| match g {
                    Group::Language => GroupBy::Language,
                    Group::RecordType => GroupBy::RecordType,
                }),
                curve,
            },
            Cmd::SweepAlpha { gold } => Command::SweepAlpha { gold },
            Cmd::VocabStats => Command::VocabStats,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = load_config(&cli.config).and_then(|mut cfg| {
        if let Some(s) = cli.seed {
            cfg.seed = s;
        }
        if let Some(a) = cli.alpha {
            cfg.combine.alpha = a;
        }
        if let Some(t) = cli.threshold {
            cfg.mapping.threshold = t;
        }
        if let Some(w) = cli.hybrid_weight {
            cfg.mapping.hybrid_weight = w;
        }
        let opts = ExecOptions {
            force: cli.force,
            api_key: std::env::var(ENV_API_KEY).ok(),
        };
        execute(&cli.command.into(), &cfg, &opts)
    });
    match result {
        Ok(outcome) => {
            println!("{}", serde_json::to_string_pretty(&outcome).expect("outcome serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
