use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dgms::model::{AggOp, MatchOp};

#[derive(Debug, Parser)]
#[command(name = "dgms", version, about = "Semantic code retrieval with deep graph matching")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a single text or code graph.
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Filter raw (doc, code) JSONL into a corpus with built graphs.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Train a model and write the best checkpoint.
    Train(Common),
    /// Check analytic against numeric gradients of the full triple loss.
    Gradcheck(GradcheckArgs),
    /// Precompute code-graph encodings.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Rank candidate pools and report MRR and S@k.
    Evaluate(EvaluateArgs),
    /// Rank the corpus for a natural-language query.
    Search(SearchArgs),
}

#[derive(Debug, Subcommand)]
pub enum GraphCommand {
    /// Text graph from a description (flat parse unless --parse is given).
    Text(GraphTextArgs),
    /// Program graph from MiniLang source or AST JSON.
    Code(GraphCodeArgs),
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    /// Apply the corpus filters and build graphs.
    Build(Common),
    /// Write a deterministic synthetic raw corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    /// Encode every code graph of a corpus with a checkpoint.
    Build(Common),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Lang {
    Minilang,
    AstJson,
}

#[derive(Debug, Args)]
pub struct GraphTextArgs {
    /// Bracketed constituency parse of the input text.
    #[arg(long, value_name = "PATH")]
    pub parse: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct GraphCodeArgs {
    #[arg(long, value_enum, default_value = "minilang")]
    pub lang: Lang,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of (doc, code) pairs.
    #[arg(long, default_value_t = 64)]
    pub count: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Number of random triples.
    #[arg(long, default_value_t = 20)]
    pub cases: usize,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Also write the sampled pools as JSON.
    #[arg(long, value_name = "PATH")]
    pub pools: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Query text; without it (or with --repl) queries are read from stdin.
    #[arg(long)]
    pub query: Option<String>,
    /// Bracketed constituency parse of --query.
    #[arg(long)]
    pub parse: Option<String>,
    /// Read one query per line and print a table after each.
    #[arg(long)]
    pub repl: bool,
    /// Print results as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub common: Common,
}

/// Flags shared by every subcommand. A flag overrides the config file.
#[derive(Debug, Args, Default)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, value_name = "N", env = "DGMS_THREADS")]
    pub threads: Option<usize>,
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    #[arg(long = "out", value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Validation corpus for `train` (default: last 10% of --in).
    #[arg(long, value_name = "PATH")]
    pub val: Option<PathBuf>,
    /// Candidates per query, ground truth included [default: 100].
    #[arg(long, value_name = "N")]
    pub pool_size: Option<usize>,
    /// [default: 10]
    #[arg(long, value_name = "N")]
    pub top_k: Option<usize>,
    /// none|sub|mul|submul [default: submul]
    #[arg(long, value_name = "OP")]
    pub match_op: Option<MatchOp>,
    /// avg|max|fcavg|fcmax [default: fcmax]
    #[arg(long, value_name = "OP")]
    pub agg_op: Option<AggOp>,
    /// [default: 100]
    #[arg(long, value_name = "N")]
    pub rgcn_dim: Option<usize>,
    /// Width of the FC aggregation output [default: 100].
    #[arg(long, value_name = "N")]
    pub agg_dim: Option<usize>,
    /// Width of node features; must match --embeddings [default: 300].
    #[arg(long, value_name = "N")]
    pub input_dim: Option<usize>,
    /// RGCN layers [default: 1].
    #[arg(long, value_name = "N")]
    pub layers: Option<usize>,
    /// [default: 10]
    #[arg(long, value_name = "N")]
    pub epochs: Option<usize>,
    /// Ranking-loss margin [default: 0.5].
    #[arg(long, value_name = "F")]
    pub margin: Option<f32>,
    /// Adam learning rate [default: 0.0001].
    #[arg(long, value_name = "F")]
    pub lr: Option<f32>,
    /// Triples per batch [default: 10].
    #[arg(long, value_name = "N")]
    pub batch: Option<usize>,
    /// Reuse epoch 0's negatives in every epoch.
    #[arg(long)]
    pub freeze_negatives: bool,
    /// [default: 3]
    #[arg(long, value_name = "N")]
    pub min_lines: Option<usize>,
    /// [default: 3]
    #[arg(long, value_name = "N")]
    pub min_words: Option<usize>,
    /// [default: 300]
    #[arg(long, value_name = "N")]
    pub max_nodes: Option<usize>,
    /// Drop docs whose share of ASCII letters is below this (off by default).
    #[arg(long, value_name = "F")]
    pub ascii_ratio: Option<f32>,
    /// GloVe text vectors (default: hashed vectors seeded by the model seed).
    #[arg(long, value_name = "PATH")]
    pub embeddings: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// Embedding index directory.
    #[arg(long, value_name = "PATH")]
    pub index: Option<PathBuf>,
    /// Per-epoch JSONL training log (default: stdout).
    #[arg(long, value_name = "PATH")]
    pub log: Option<PathBuf>,
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Graph(GraphCommand::Text(a)) => &a.common,
            Command::Graph(GraphCommand::Code(a)) => &a.common,
            Command::Corpus(CorpusCommand::Build(c)) => c,
            Command::Corpus(CorpusCommand::Synth(a)) => &a.common,
            Command::Train(c) => c,
            Command::Gradcheck(a) => &a.common,
            Command::Index(IndexCommand::Build(c)) => c,
            Command::Evaluate(a) => &a.common,
            Command::Search(a) => &a.common,
        }
    }
}
