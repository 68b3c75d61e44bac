use std::net::SocketAddr;
use std::path::PathBuf;

use causeway_core::discovery::Algorithm;
use causeway_core::synth::SynthKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "causeway", version, about = "Causal discovery and comparable layouts for multi-outcome graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a CSV, infer variable types and print the schema.
    Ingest(IngestArgs),
    /// Run the discovery algorithms to completion.
    Discover(DiscoverArgs),
    /// Lay out one or more graphs and emit SVG, DOT and stress figures.
    Layout(LayoutArgs),
    /// Assemble a comparison from saved history entries.
    Compare(CompareArgs),
    /// Score predicted edge sets against a known DAG.
    Eval(EvalArgs),
    /// Generate a synthetic dataset with known structure.
    Synth(SynthArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct TypeOverrides {
    /// Columns to treat as categorical.
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,
    /// Columns to treat as continuous.
    #[arg(long, value_delimiter = ',')]
    pub continuous: Vec<String>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub csv: PathBuf,
    #[command(flatten)]
    pub types: TypeOverrides,
    /// Also store the dataset in this service data directory.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    /// CSV file, or a dataset id when --data-dir is given.
    #[arg(long)]
    pub dataset: String,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[command(flatten)]
    pub types: TypeOverrides,
    #[arg(long)]
    pub outcome: String,
    /// Keep the N variables most correlated with the outcome.
    #[arg(long, conflicts_with = "vars")]
    pub top: Option<usize>,
    /// Explicit variable selection; the outcome is added when missing.
    #[arg(long, value_delimiter = ',')]
    pub vars: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "pc,continuous,hybrid")]
    pub algos: Vec<Algorithm>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Edge threshold on learned weights.
    #[arg(long, default_value_t = 0.3)]
    pub threshold: f64,
    #[arg(long, default_value_t = 300)]
    pub max_epochs: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Snapshot JSON destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the backbone graph, with effects and layout, here.
    #[arg(long)]
    pub graph_out: Option<PathBuf>,
    #[arg(long, default_value = "pc")]
    pub backbone: Algorithm,
    /// Id of the emitted graph; defaults to the outcome name.
    #[arg(long)]
    pub graph_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutMode {
    Super,
    Extracted,
    Compressed,
}

#[derive(Debug, Args)]
pub struct LayoutArgs {
    /// Graph, graph view or history entry JSON files.
    #[arg(long, num_args = 1.., required = true)]
    pub graphs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = LayoutMode::Compressed)]
    pub mode: LayoutMode,
    /// Directory for SVG output.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Directory for DOT output.
    #[arg(long)]
    pub dot: Option<PathBuf>,
    /// Print extracted and compressed stress per graph.
    #[arg(long)]
    pub stress: bool,
    /// Write the full comparison JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// History directory, or a service data directory containing one.
    #[arg(long)]
    pub history: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    pub ids: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Snapshot, graph or edge-set JSON; may be repeated.
    #[arg(long, num_args = 1.., required = true)]
    pub pred: Vec<PathBuf>,
    /// Truth as written by `synth --truth`, or a graph JSON.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the generating graph here.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "CAUSEWAY_ADDR", default_value = causeway_service::DEFAULT_ADDR)]
    pub addr: SocketAddr,
    #[arg(long, env = "CAUSEWAY_DATA_DIR", default_value = "causeway-data")]
    pub data_dir: PathBuf,
    #[arg(long, env = "CAUSEWAY_CI_ALPHA", default_value_t = 0.05)]
    pub ci_alpha: f64,
    #[arg(long, env = "CAUSEWAY_THRESHOLD", default_value_t = 0.3)]
    pub threshold: f64,
    #[arg(long, env = "CAUSEWAY_MAX_EPOCHS", default_value_t = 300)]
    pub max_epochs: u32,
}
