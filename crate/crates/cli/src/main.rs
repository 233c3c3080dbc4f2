//! `superchars`: render, train and evaluate Super Characters classifiers.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use superchars::dataset::Task;
use superchars::matrix::ArchPreset;
use superchars::Scheme;

#[derive(Debug, Parser)]
#[command(name = "superchars", version, about = "Text and tabular attributes as images, classified by a CNN")]
struct Cli {
    /// Seed for every random choice (folds, initialization, shuffling).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for rendering and training; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Corpus statistics and the sentence-length histogram.
    Stats {
        csv: PathBuf,
        /// Directory for stats.txt, histogram.txt and histogram.png.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a corpus to PNGs, a tensor file and a manifest.
    Render(RenderArgs),
    /// Render the space-prefix augmentation set (design four).
    Augment {
        csv: PathBuf,
        #[arg(long, default_value = "augmented")]
        out: PathBuf,
        /// Attach this task's label to each image.
        #[arg(long, value_parser = parse_task)]
        task: Option<Task>,
        /// Drop the unshifted image when shifted ones exist.
        #[arg(long)]
        no_original: bool,
    },
    /// Assign records to k folds.
    Folds {
        csv: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Keep label proportions of this task equal across folds.
        #[arg(long, value_parser = parse_task)]
        stratify: Option<Task>,
        #[arg(long, default_value = "folds.csv")]
        out: PathBuf,
    },
    /// Train one model per (task, fold) and predict each held-out fold.
    Train(TrainArgs),
    /// Apply trained or quantized checkpoints to a corpus.
    Predict {
        csv: PathBuf,
        /// Checkpoint (.scnn float or .scfx fixed point); repeatable.
        #[arg(long = "model", required = true)]
        models: Vec<PathBuf>,
        #[arg(long, default_value = "one", value_parser = parse_scheme)]
        design: Scheme,
        /// Task for the prediction rows; inferred from `<task>_fold<f>` file names.
        #[arg(long, value_parser = parse_task)]
        task: Option<Task>,
        #[arg(long)]
        fold: Option<usize>,
        #[arg(long, default_value = "predictions.csv")]
        out: PathBuf,
    },
    /// Score run directories against a labeled corpus.
    Eval {
        csv: PathBuf,
        /// Output directory of a `train` run; repeatable.
        #[arg(long = "runs", required = true)]
        runs: Vec<PathBuf>,
        /// Directory for report.txt and report.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a float checkpoint to power-of-two fixed point.
    Quantize {
        model: PathBuf,
        #[arg(long, default_value_t = 8)]
        bits: u32,
        /// Also quantize activations after each ReLU.
        #[arg(long)]
        activation_bits: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a single word cell, for inspecting the glyph renderer.
    Glyph {
        word: String,
        #[arg(long, default_value_t = 32)]
        side: usize,
        #[arg(long, default_value = "glyph.png")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RenderArgs {
    csv: PathBuf,
    #[arg(long, default_value = "one", value_parser = parse_scheme)]
    design: Scheme,
    #[arg(long, default_value = "rendered")]
    out: PathBuf,
    #[arg(long, value_parser = parse_task)]
    task: Option<Task>,
    #[arg(long)]
    no_original: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    csv: PathBuf,
    /// `one` or `four`.
    #[arg(long, default_value = "one", value_parser = parse_scheme)]
    design: Scheme,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Fold plan written by `folds`; generated from --seed and --k otherwise.
    #[arg(long)]
    folds_file: Option<PathBuf>,
    /// Held-out folds to run, comma separated; all by default.
    #[arg(long, value_delimiter = ',')]
    only_folds: Option<Vec<usize>>,
    /// Comma-separated task names; all six by default.
    #[arg(long, value_delimiter = ',', value_parser = parse_task)]
    tasks: Option<Vec<Task>>,
    /// Train on 1×112×112 inputs instead of 3×224×224.
    #[arg(long)]
    desk_scale: bool,
    #[arg(long, default_value = "standard", value_parser = parse_arch)]
    arch: ArchPreset,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long)]
    no_original: bool,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: superchars::Error| e.to_string())
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse().map_err(|e: superchars::Error| e.to_string())
}

fn parse_arch(s: &str) -> Result<ArchPreset, String> {
    s.parse().map_err(|e: superchars::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
