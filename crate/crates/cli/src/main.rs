//! `mvge` command-line tool.
//!
//! Exit codes: 0 success, 2 usage or validation failure, 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mvge::augment::Aggr;
use mvge::model::{AdjLossMode, EgoEncoderKind, EmbeddingView, MergeFn, TaskMask};

#[derive(Parser, Debug)]
#[command(name = "mvge", version, about = "Multi-view unsupervised graph embedding")]
pub struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// JSON config (bare model config, or a run manifest with a "config" key).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Homophily statistics of a labelled dataset.
    Stats {
        dataset: PathBuf,
        #[arg(long, default_value_t = mvge::homophily::DEFAULT_BINS)]
        bins: usize,
    },
    /// Generate a synthetic dataset with a target homophily.
    Synth(SynthArgs),
    /// Train embeddings.
    Embed {
        dataset: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Node classification on saved embeddings.
    EvalNode {
        /// Embedding file (.bin or .csv).
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Link prediction; embeddings are retrained per repeat on the train graph.
    EvalLink {
        dataset: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, default_value = "merged")]
        view: EmbeddingView,
    },
    /// Same-class pair prediction on saved embeddings.
    EvalPair {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Positives (and negatives) per repeat; defaults to the edge count.
        #[arg(long)]
        pairs: Option<usize>,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Grid search over (alpha, beta) on a validation split.
    Gridsearch {
        dataset: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.1)]
        grid_step: f64,
        #[arg(long, default_value_t = 0.2)]
        val_fraction: f64,
        #[arg(long, default_value = "merged")]
        view: EmbeddingView,
    },
    /// Per-dimension standard deviation of the ego and agg embeddings.
    Diag {
        /// Directory written by `embed`.
        embed_dir: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Target edge homophily in [0, 1].
    #[arg(long = "h", value_parser = parse_unit)]
    pub homophily: f64,
    #[arg(long = "n", default_value_t = 1490)]
    pub nodes: usize,
    #[arg(long = "c", default_value_t = 5)]
    pub classes: usize,
    #[arg(long, default_value_t = 4.0)]
    pub avg_degree: f64,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct ModelArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, value_parser = parse_unit)]
    pub alpha: Option<f64>,
    #[arg(long, value_parser = parse_unit)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub dim_ego: Option<usize>,
    #[arg(long)]
    pub dim_agg: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Comma-separated walk lengths, e.g. 3,5,10.
    #[arg(long, value_delimiter = ',')]
    pub walk_lengths: Option<Vec<usize>>,
    #[arg(long)]
    pub aggr: Option<Aggr>,
    #[arg(long)]
    pub merge: Option<MergeFn>,
    /// Comma-separated subset of ego,agg,adj.
    #[arg(long)]
    pub task_mask: Option<TaskMask>,
    #[arg(long)]
    pub ego_encoder: Option<EgoEncoderKind>,
    #[arg(long)]
    pub gcn_bias: Option<bool>,
    #[arg(long)]
    pub adj_loss_mode: Option<AdjLossMode>,
    #[arg(long)]
    pub sample_ratio: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct SplitArgs {
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Defaults to 0.3 for nodes and 0.85 for pairs and links.
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

fn parse_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<mvge::Error>())
        .any(mvge::Error::is_numerical);
    if numerical {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
