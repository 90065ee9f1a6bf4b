use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "relstab", version, about = "Relevance-map stability experiments on synthetic MRI-like slices")]
pub struct Cli {
    /// key=value configuration file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed for data, initialisation, shuffling, corruption and LIME sampling
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (for `plot`, the SVG file)
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps and RSSA matrices
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Override a config key, e.g. `--set epochs=5` (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic corpus
    Generate,
    /// Train the CNN; writes model.ckpt, trace.csv and loss.svg
    Train {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Corrupt a fraction of a corpus into a new corpus directory
    Corrupt {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// gaussian, rician, chisq or didactic
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long)]
        fraction: f64,
    },
    /// Write relevance maps for selected images
    Explain {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Comma-separated image ids
        #[arg(long, value_delimiter = ',', required = true)]
        ids: Vec<usize>,
        /// Comma-separated explainer names
        #[arg(long)]
        explainers: Option<String>,
    },
    /// RSSA matrices, maps, didactic localisation and the explainer comparison
    Rssa {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Retrain over the kind × λ × fraction grid; writes sweep.csv and figures
    Sweep {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Corrupt only the validation set and keep the clean model
        #[arg(long)]
        test_only: bool,
    },
    /// Render a CSV written by this tool as SVG
    Plot {
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Restrict accuracy plots to one corruption kind
        #[arg(long)]
        select: Option<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// trace.csv: loss per epoch
    Loss,
    /// sweep.csv: validation accuracy against fraction
    Accuracy,
    /// sweep.csv: RSSA against λ
    Rssa,
    /// RSSA matrix CSV
    Heatmap,
}
