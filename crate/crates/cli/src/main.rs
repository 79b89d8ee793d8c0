//! `agenda`: prepare policy documents, train word embeddings, and label
//! documents with agenda queries.
//!
//! Every command works on a workspace directory (`--workspace`, default `.`)
//! with a fixed file layout, so the stages can be run one at a time:
//!
//! ```text
//! agenda ingest --manifest study_manifest.csv
//! agenda ingest --manifest background_manifest.csv --background
//! agenda phrases
//! agenda train --seed 7
//! agenda vectorize
//! agenda classify --queries queries.jsonl
//! agenda evaluate --gold gold.csv
//! ```
//!
//! or all at once with `agenda pipeline --config pipeline.toml`.
//!
//! On failure a single JSON line goes to stderr and the exit code is 2 for a
//! missing input, 3 for invalid input and 1 for anything else.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::FormatName;

#[derive(Parser, Debug)]
#[command(name = "agenda", version, about = "Agenda classification of policy documents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct WorkspaceArg {
    /// Workspace directory holding intermediate files.
    #[arg(short, long, default_value = ".")]
    workspace: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct QueryArgs {
    /// Inline query, `label:term1,term2`. May be repeated.
    #[arg(short, long = "query")]
    query: Vec<String>,
    /// File with one JSON query per line; defaults to the workspace's
    /// queries.jsonl when no inline query is given.
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Threshold applied to every query instead of its own.
    #[arg(short, long)]
    threshold: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
struct TrainArgs {
    /// Pipeline configuration file; its [embedding] table is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// More than one worker is faster but not reproducible.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    min_count: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Output path; defaults to embeddings.txt or embeddings.bin in the
    /// workspace.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(clap::ValueEnum, Debug, Clone, Copy)]
enum Format {
    Text,
    Binary,
}

impl From<Format> for FormatName {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => FormatName::Text,
            Format::Binary => FormatName::Binary,
        }
    }
}

#[derive(clap::ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Default)]
enum Order {
    #[default]
    Desc,
    Asc,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded synthetic benchmark (documents, gold labels, queries,
    /// pipeline.toml).
    Synth {
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        study_docs: usize,
    },
    /// Read, clean, spell-correct and segment the documents of a manifest.
    Ingest {
        #[command(flatten)]
        ws: WorkspaceArg,
        /// CSV with columns doc_id,country,sector,title,path.
        #[arg(short, long)]
        manifest: PathBuf,
        /// Store as the background corpus instead of the study corpus.
        #[arg(long)]
        background: bool,
        /// JSON list of {name, pattern, replacement} cleaning rules.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Word list enabling spelling correction.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        min_paragraph_tokens: Option<usize>,
        #[arg(long)]
        page_delimiter: Option<String>,
    },
    /// Learn multi-word phrases from the background corpus.
    Phrases {
        #[command(flatten)]
        ws: WorkspaceArg,
        #[arg(long)]
        min_pair_count: Option<usize>,
        #[arg(long)]
        score_threshold: Option<f64>,
        #[arg(long)]
        passes: Option<usize>,
    },
    /// Train skip-gram embeddings on the background corpus.
    Train {
        #[command(flatten)]
        ws: WorkspaceArg,
        #[command(flatten)]
        args: TrainArgs,
    },
    /// Embed the study paragraphs.
    Vectorize {
        #[command(flatten)]
        ws: WorkspaceArg,
    },
    /// Nearest vocabulary words of a term.
    Neighbors {
        #[command(flatten)]
        ws: WorkspaceArg,
        term: String,
        #[arg(short, default_value_t = 50)]
        k: usize,
    },
    /// Paragraphs reaching each query's threshold.
    Query {
        #[command(flatten)]
        ws: WorkspaceArg,
        #[command(flatten)]
        q: QueryArgs,
        #[arg(long, value_enum, default_value_t = Order::Desc)]
        order: Order,
        /// Also write the hits as CSV.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Label every study document for each query.
    Classify {
        #[command(flatten)]
        ws: WorkspaceArg,
        #[command(flatten)]
        q: QueryArgs,
        /// Defaults to labels.csv in the workspace.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Score document labels against gold labels.
    Evaluate {
        #[command(flatten)]
        ws: WorkspaceArg,
        /// CSV with columns doc_id,agenda,present.
        #[arg(short, long)]
        gold: PathBuf,
        /// Defaults to labels.csv in the workspace.
        #[arg(short, long)]
        labels: Option<PathBuf>,
        /// Also write the metrics as CSV.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Write a text and JSON report per query.
    Report {
        #[command(flatten)]
        ws: WorkspaceArg,
        #[command(flatten)]
        q: QueryArgs,
        /// Defaults to reports/ in the workspace.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run every stage from a configuration file.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(short, long)]
        threshold: Option<f64>,
        /// Workspace directory; overrides `out` in the file.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_owned();
            let e = error::CliError::validation(first);
            eprintln!("{}", e.to_line());
            return ExitCode::from(e.kind.exit_code() as u8);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_line());
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
