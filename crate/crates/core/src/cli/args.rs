use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use crate::mhn::{Activation, EncoderKind, FusionMode};
use crate::synthetic::SyntheticKind;
use crate::training::{PairSource, TrainMode};

/// Metapath-guided heterogeneous graph embedding.
#[derive(Debug, Parser)]
#[command(name = "mhn", version)]
pub struct Cli {
    /// Worker threads for sampling, training and evaluation. Results do not
    /// depend on this value.
    #[arg(long, global = true, default_value_t = 1, value_parser = positive)]
    pub workers: usize,
    /// Only report errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    /// Log progress, including per-epoch losses.
    #[arg(long, short, global = true, conflicts_with = "quiet")]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a planted-structure graph with labels and metapaths.
    MakeSynthetic(MakeSyntheticArgs),
    /// Load a graph and print a structural summary.
    Validate(ValidateArgs),
    /// Discover metapaths from random walks and rank them.
    GenMetapaths(GenMetapathsArgs),
    /// Train a model and write a checkpoint, loss history and manifest.
    Train(Box<TrainArgs>),
    /// Node classification with a logistic-regression probe on embeddings.
    EvalNodeclass(EvalNodeclassArgs),
    /// Link prediction metrics on held-out edges.
    EvalLinkpred(EvalLinkpredArgs),
    /// Nearest neighbors by Euclidean distance, with optional hit rate.
    Knn(KnnArgs),
    /// Write the embedding of every node.
    Export(ExportArgs),
    /// Print the sampled metapath neighborhood of one node.
    Sample(SampleArgs),
    /// Hide a fraction of edges for link prediction.
    SplitEdges(SplitEdgesArgs),
}

/// Parses a kebab-case name the way config files spell it.
pub(crate) fn kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown value {s:?}"))
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Directory holding nodes.tsv and edges.tsv.
    #[arg(long)]
    pub graph: PathBuf,
    /// Schema file [default: <graph>/schema.json].
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

impl GraphArgs {
    pub fn schema_path(&self) -> PathBuf {
        self.schema.clone().unwrap_or_else(|| self.graph.join("schema.json"))
    }
}

#[derive(Debug, Args)]
pub struct MakeSyntheticArgs {
    /// classification, bipartite or complementary.
    #[arg(long, value_parser = kebab::<SyntheticKind>)]
    pub kind: SyntheticKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Nodes of each main node type [default: per kind].
    #[arg(long)]
    pub nodes_per_type: Option<usize>,
    /// Planted blocks [default: per kind].
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Edge probability inside a block [default: per kind].
    #[arg(long)]
    pub p_in: Option<f64>,
    /// Edge probability across blocks [default: per kind].
    #[arg(long)]
    pub p_out: Option<f64>,
    /// Standard deviation of attribute noise [default: per kind].
    #[arg(long)]
    pub noise: Option<f64>,
    /// Ring locality width for bipartite graphs [default: per kind].
    #[arg(long)]
    pub locality: Option<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Also check a metapath file against the schema.
    #[arg(long)]
    pub metapaths: Option<PathBuf>,
    /// Also check a label file against the graph.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenMetapathsArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Nodes per random walk.
    #[arg(long, default_value_t = 10)]
    pub walk_len: usize,
    #[arg(long, default_value_t = 5, value_parser = positive)]
    pub walks_per_node: usize,
    /// Comma-separated filters: all-types, palindrome, starts-with=T,
    /// ends-with=T, min-length=N, max-length=N.
    #[arg(long, default_value = "")]
    pub rules: String,
    /// Number of metapaths kept.
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    /// Node type counted in the score numerator.
    #[arg(long)]
    pub score_num_type: Option<String>,
    /// Node type counted in the score denominator.
    #[arg(long)]
    pub score_den_type: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output metapaths.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub metapaths: PathBuf,
    /// JSON file with `model` and `train` sections, or a manifest from an
    /// earlier run. Flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// supervised or unsupervised.
    #[arg(long, value_parser = kebab::<TrainMode>)]
    pub mode: Option<TrainMode>,
    /// Node labels; required in supervised mode.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Seed for initialization, sampling, pairs and splits.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Embedding dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// mean, weighted or nonlinear.
    #[arg(long, value_parser = kebab::<EncoderKind>)]
    pub encoder: Option<EncoderKind>,
    /// sigmoid or relu.
    #[arg(long, value_parser = kebab::<Activation>)]
    pub nonlinearity: Option<Activation>,
    /// metapath-attention or multi-head.
    #[arg(long, value_parser = kebab::<FusionMode>)]
    pub fusion: Option<FusionMode>,
    #[arg(long)]
    pub heads: Option<usize>,
    /// Negative pairs per positive pair.
    #[arg(long)]
    pub negatives: Option<usize>,
    /// edges or walks.
    #[arg(long, value_parser = kebab::<PairSource>)]
    pub pair_source: Option<PairSource>,
    /// Pairs per gradient chunk (0 = one chunk).
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    /// Reuse the epoch-0 neighbor samples in every epoch.
    #[arg(long)]
    pub freeze_sampling: bool,
}

#[derive(Debug, Args)]
pub struct CheckpointArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// checkpoint.mhn written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalNodeclassArgs {
    #[command(flatten)]
    pub model: CheckpointArgs,
    /// Labels of the probe nodes, ideally unseen during training.
    #[arg(long)]
    pub labels: PathBuf,
    /// Probe training proportions.
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8")]
    pub train_fractions: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output metrics.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalLinkpredArgs {
    #[command(flatten)]
    pub model: CheckpointArgs,
    /// Held-out positive edges (edges.tsv format).
    #[arg(long)]
    pub test_edges: PathBuf,
    /// Negative pairs; sampled uniformly from non-edges when omitted.
    #[arg(long)]
    pub test_negatives: Option<PathBuf>,
    /// Probability at or above which a pair is predicted linked.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Seed for sampled negatives.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output metrics.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct KnnArgs {
    #[command(flatten)]
    pub model: CheckpointArgs,
    /// Query node; repeatable.
    #[arg(long = "query")]
    pub queries: Vec<String>,
    /// `query<TAB>target` lines; adds their queries and reports hit rate.
    #[arg(long)]
    pub targets: Option<PathBuf>,
    #[arg(long, default_value_t = 10, value_parser = positive)]
    pub k: usize,
    /// Only return nodes of this type.
    #[arg(long)]
    pub candidate_type: Option<String>,
    /// Output JSON with neighbor lists and metrics.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub model: CheckpointArgs,
    /// Output embeddings.tsv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub metapaths: PathBuf,
    #[arg(long)]
    pub node: String,
    /// Metapath id.
    #[arg(long)]
    pub metapath: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub epoch: u64,
    #[arg(long, default_value_t = 10, value_parser = positive)]
    pub n_instances: usize,
    #[arg(long, default_value_t = 100, value_parser = positive)]
    pub max_retries: usize,
    /// List every instance instead of sampling.
    #[arg(long)]
    pub enumerate: bool,
}

#[derive(Debug, Args)]
pub struct SplitEdgesArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Share of edges to hide.
    #[arg(long, default_value_t = 0.1)]
    pub fraction: f64,
    /// Edge types to split, comma separated [default: all].
    #[arg(long, value_delimiter = ',')]
    pub edge_types: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Receives the remaining graph, test_edges.tsv and test_negatives.tsv.
    #[arg(long)]
    pub out_dir: PathBuf,
}
