//! `sqsim`: file-based pipeline for semantic question similarity.
//!
//! Exit codes: 0 success, 2 usage, 3 missing file, 4 malformed file,
//! 5 invalid input or dataset, 6 numeric failure, 7 other I/O errors.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sqsim::embed::LayerCombine;

#[derive(Debug, Parser)]
#[command(name = "sqsim", version, about, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Combine {
    Mean,
    Sum,
}

impl From<Combine> for LayerCombine {
    fn from(c: Combine) -> Self {
        match c {
            Combine::Mean => LayerCombine::Mean,
            Combine::Sum => LayerCombine::Sum,
        }
    }
}

/// Precomputed embeddings: JSONL with one `{"q": .., "emb": [[..]]}` or
/// `{"q": .., "layers": [[[..]]; 3]}` record per question.
#[derive(Debug, Args)]
struct EmbArgs {
    #[arg(long, value_name = "JSONL")]
    emb: PathBuf,
    /// How three-layer records are folded into one vector per token.
    #[arg(long, value_enum, default_value = "mean")]
    layer_combine: Combine,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Separate punctuation in every question of a pair TSV.
    ///
    /// Input and output: `question1<TAB>question2[<TAB>label[<TAB>provenance]]`
    /// with a header row. With `--lines`, one question per line instead.
    Preprocess {
        #[arg(long = "in", value_name = "TSV")]
        input: PathBuf,
        #[arg(long, value_name = "TSV")]
        out: PathBuf,
        /// UTF-8 file whose non-whitespace characters form the punctuation
        /// set. Defaults to Arabic and Latin sentence punctuation.
        #[arg(long, value_name = "PATH")]
        punct_file: Option<PathBuf>,
        #[arg(long)]
        lines: bool,
    },
    /// Expand a labeled pair TSV with the transitive, symmetric and
    /// reflexive rules.
    ///
    /// Output adds a provenance column. The summary JSON holds the tally after
    /// each stage.
    Augment {
        #[arg(long = "in", value_name = "TSV")]
        input: PathBuf,
        #[arg(long, value_name = "TSV")]
        out: PathBuf,
        /// Comma-separated subset of t, s, r.
        #[arg(long, default_value = "t,s,r")]
        stages: String,
        #[arg(long, value_name = "JSON")]
        summary: PathBuf,
        /// Also write every dropped transitive derivation.
        #[arg(long, value_name = "JSON")]
        conflicts: Option<PathBuf>,
    },
    /// Deterministic pseudo-embeddings for every distinct question of a pair
    /// TSV (or of a question list with `--lines`).
    EmbedStub {
        #[arg(long = "in", value_name = "TSV")]
        input: PathBuf,
        #[arg(long, default_value_t = sqsim::embed::DEFAULT_DIM)]
        dim: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_name = "JSONL")]
        out: PathBuf,
        #[arg(long)]
        lines: bool,
    },
    /// Train five model replicas.
    ///
    /// The config JSON may set any of `model`, `optimizer`, `batch_size`,
    /// `epochs`, `seeds`, `threshold`, `precision`; missing fields take the
    /// full-size defaults. The output directory receives `replica_<i>.sqsim`,
    /// `history_<i>.json`, `train_summary.json` and `manifest.json`.
    Train {
        #[arg(long, value_name = "JSON")]
        config: Option<PathBuf>,
        #[arg(long, value_name = "TSV")]
        train: PathBuf,
        #[command(flatten)]
        emb: EmbArgs,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
        /// Replaces the configured seeds with `seed .. seed + 4`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the configured epoch count.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score the five replicas of a `train` output directory and write the
    /// min / max / avg / majority-vote F1 report.
    Evaluate {
        #[arg(long, value_name = "DIR")]
        models: PathBuf,
        #[arg(long, value_name = "TSV")]
        test: PathBuf,
        #[command(flatten)]
        emb: EmbArgs,
        #[arg(long, value_name = "JSON")]
        report: PathBuf,
    },
    /// Similarity probability and label for every pair of a TSV.
    ///
    /// Output CSV columns: question1, question2, probability, label.
    Predict {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "TSV")]
        pairs: PathBuf,
        #[command(flatten)]
        emb: EmbArgs,
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Question representations for external plotting.
    ///
    /// Reads one question per line and writes JSONL records
    /// `{"q": .., "repr": [..], "attention": [..]}`.
    ExportReprs {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "TXT")]
        questions: PathBuf,
        #[command(flatten)]
        emb: EmbArgs,
        #[arg(long, value_name = "JSONL")]
        out: PathBuf,
    },
    /// Finite-difference check of reverse-mode gradients on a tiny model.
    Gradcheck {
        /// Check the tiny configuration (width 8, hidden 4, chunk 2).
        #[arg(long, required = true)]
        tiny: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = sqsim::model::TINY_CHECK_EPS)]
        eps: f64,
        /// Write the full per-tensor report as JSON.
        #[arg(long, value_name = "JSON")]
        report: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
