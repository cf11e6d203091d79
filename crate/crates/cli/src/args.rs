use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub const MODES: [&str; 4] = ["bap", "dbap5", "dbap6", "dbap7"];
pub const SEGMENTATIONS: [&str; 2] = ["gold", "e2e"];
pub const DECODERS: [&str; 2] = ["mst", "greedy"];
pub const FORMATS: [&str; 3] = ["tsv", "markdown", "json"];

#[derive(Debug, Parser)]
#[command(
    name = "dbap",
    version,
    about = "Discourse-driven biaffine argument parser"
)]
pub struct Cli {
    /// Report errors as one JSON object on stderr
    #[arg(long, global = true)]
    pub json_errors: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert argument-graph XML files into JSON document bundles
    Convert(ConvertArgs),
    /// Pairwise kappa between discourse structure variants of each text
    Agree(AgreeArgs),
    /// Train one parser and write a checkpoint with its history
    Train(TrainArgs),
    /// Parse documents with a checkpoint, one JSON line per document
    Parse(ParseArgs),
    /// Cross-validate parser configurations, or score saved parses
    Eval(EvalArgs),
    /// Learned discourse coefficients per relation and direction
    ExportCoeffs(ExportArgs),
    /// Write a synthetic corpus with aligned discourse dependencies
    Synth(SynthArgs),
}

/// Options shared by the commands that build models from a corpus.
#[derive(Debug, Clone, Default, Args)]
pub struct RunOpts {
    /// TOML run configuration; flags given on the command line win
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory of JSON document bundles
    #[arg(long, value_name = "DIR")]
    pub corpus: Option<PathBuf>,
    /// Directory of discourse trees or dependencies, one JSON file each
    #[arg(long, value_name = "DIR")]
    pub rst_dir: Option<PathBuf>,
    /// Binary unit-embedding file (repeatable); the hash encoder is used when absent
    #[arg(long, value_name = "PATH")]
    pub embeddings: Vec<PathBuf>,
    /// Dimension of the hash encoder
    #[arg(long, value_name = "N")]
    pub hash_dim: Option<usize>,
    /// Parser variant
    #[arg(long, value_parser = MODES)]
    pub mode: Option<String>,
    /// Gold argumentative units, or discourse units with same-arg links
    #[arg(long, value_parser = SEGMENTATIONS)]
    pub segmentation: Option<String>,
    /// Add every paraphrase of a training document to the training data
    #[arg(long)]
    pub augmented: bool,
    /// Fold definitions as JSON [{"train": [...], "test": [...]}]
    #[arg(long, value_name = "PATH")]
    pub splits: Option<PathBuf>,
    /// Seed for every random choice of the run
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Folds trained in parallel
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    /// Upper bound on training epochs
    #[arg(long, value_name = "N")]
    pub max_epochs: Option<usize>,
    /// Tree decoder
    #[arg(long, value_parser = DECODERS)]
    pub decoder: Option<String>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// XML files or directories containing them
    #[arg(required = true, value_name = "INPUT")]
    pub inputs: Vec<PathBuf>,
    /// Output directory for the JSON bundles
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Keep the original function labels instead of the simplified set
    #[arg(long)]
    pub raw_functions: bool,
}

#[derive(Debug, Args)]
pub struct AgreeArgs {
    /// Directory of JSON document bundles
    #[arg(long, value_name = "DIR")]
    pub corpus: PathBuf,
    /// Directory of discourse trees or dependencies
    #[arg(long, value_name = "DIR")]
    pub rst_dir: PathBuf,
    /// Write the table here instead of stdout
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunOpts,
    /// Train on the training side of this fold of --splits
    #[arg(long, value_name = "N")]
    pub fold: Option<usize>,
    /// Checkpoint path
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// History path; defaults to the checkpoint path with .history.json appended
    #[arg(long, value_name = "PATH")]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    /// Checkpoint written by `train`
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Directory of JSON document bundles
    #[arg(long, value_name = "DIR")]
    pub corpus: PathBuf,
    /// Directory of discourse trees or dependencies
    #[arg(long, value_name = "DIR")]
    pub rst_dir: Option<PathBuf>,
    /// Binary unit-embedding file (repeatable)
    #[arg(long, value_name = "PATH")]
    pub embeddings: Vec<PathBuf>,
    /// Only parse these documents (repeatable)
    #[arg(long, value_name = "ID")]
    pub doc: Vec<String>,
    /// Tree decoder
    #[arg(long, value_parser = DECODERS, default_value = "mst")]
    pub decoder: String,
    /// Include the modulated arc-score matrix
    #[arg(long)]
    pub scores: bool,
    /// Write JSON lines here instead of stdout
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub run: RunOpts,
    /// Comma-separated variants to compare; the first is the baseline
    #[arg(long, value_name = "LIST", value_delimiter = ',', value_parser = MODES)]
    pub modes: Vec<String>,
    /// Number of folds when --splits is not given
    #[arg(long, value_name = "K")]
    pub folds: Option<usize>,
    /// Write the fold definitions used
    #[arg(long, value_name = "PATH")]
    pub save_splits: Option<PathBuf>,
    /// Score saved parses (JSON lines from `parse`) against the corpus instead of training
    #[arg(long, value_name = "PATH")]
    pub pred: Option<PathBuf>,
    /// Keep same-arg units in the attachment and function tallies
    #[arg(long)]
    pub keep_same_arg: bool,
    /// Report format
    #[arg(long, value_parser = FORMATS, default_value = "tsv")]
    pub format: String,
    /// Write the report here instead of stdout
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Checkpoints, one per fold (repeatable)
    #[arg(long = "model", required = true, value_name = "PATH")]
    pub models: Vec<PathBuf>,
    /// Spread across checkpoints above which a tendency counts as vague
    #[arg(long, value_name = "X", default_value_t = dbap::parser::DEFAULT_BUCKET_THRESHOLD)]
    pub threshold: f64,
    /// Write the table here instead of stdout
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory; receives corpus/ and rst/
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Number of documents
    #[arg(long, value_name = "N", default_value_t = 60)]
    pub docs: usize,
    /// Share of arcs on which discourse and argument heads agree
    #[arg(long, value_name = "X", default_value_t = 0.8)]
    pub agreement: f64,
    /// Probability of an attack arc
    #[arg(long, value_name = "X", default_value_t = 0.3)]
    pub attack_rate: f64,
    /// Pair every document with one paraphrase
    #[arg(long)]
    pub paraphrases: bool,
    /// Random seed
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub seed: u64,
}
