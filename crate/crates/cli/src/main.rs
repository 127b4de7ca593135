//! `semmap`: ingest, pool, fit, benchmark and measure document embeddings.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

mod artifact;
mod commands;
mod sets;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use semmap::pooling::Strategy;

/// Bad invocation that clap could not catch (malformed set specs,
/// incompatible flags). Reported with exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "semmap", version, about = "Document embedding spaces and semantic metrics")]
struct Cli {
    /// Worker threads for parallel stages (default: one per core). Output
    /// does not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse MEDLINE XML archives (.xml or .xml.gz) into the store.
    Ingest(IngestArgs),
    /// Write normalized `pmid<TAB>text` for encoding, or show one record.
    Prep(PrepArgs),
    /// Pool activations (or static word vectors) into an embedding space.
    Pool(PoolArgs),
    /// Demean and PCA-reduce an embedding space into a new one.
    FitSpace(FitSpaceArgs),
    /// Journal-discriminability retrieval benchmark.
    Bench(BenchArgs),
    /// Breadth, distance, novelty, axis, mixture and perplexity metrics.
    Metrics(MetricsArgs),
    /// Two-dimensional map coordinates as TSV.
    ExportMap(ExportMapArgs),
    /// Check a TACS activation container document by document.
    ValidateContainer(ValidateArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    store: PathBuf,
    /// Archive to read; repeatable.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PrepArgs {
    #[arg(long)]
    store: PathBuf,
    /// Show the normalized text of a single record.
    #[arg(long)]
    pmid: Option<u64>,
    /// Only records from this journal.
    #[arg(long)]
    journal: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: semmap::pooling::PoolingError| e.to_string())
}

#[derive(Debug, Args)]
struct PoolArgs {
    #[arg(long)]
    store: PathBuf,
    /// Target space id.
    #[arg(long)]
    space: String,
    #[arg(long, value_parser = parse_strategy)]
    strategy: Strategy,
    /// TACS container (contextual strategies).
    #[arg(long)]
    container: Option<PathBuf>,
    /// Word-vector text file (static_mean).
    #[arg(long)]
    word_vectors: Option<PathBuf>,
    #[arg(long, default_value_t = semmap::pooling::DEFAULT_MIN_CHARS)]
    min_chars: usize,
    #[arg(long, default_value = semmap::activation::DEFAULT_CONTINUATION_MARKER)]
    marker: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitSpaceArgs {
    #[arg(long)]
    store: PathBuf,
    /// Source space.
    #[arg(long)]
    space: String,
    /// Id of the reduced space to create.
    #[arg(long)]
    out_space: String,
    #[arg(long, default_value_t = 100)]
    dims: usize,
    /// Rows drawn for the mean and the PCA fit.
    #[arg(long, default_value_t = 100_000)]
    sample: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    anisotropy_pairs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    space: String,
    /// Comma-separated journal titles.
    #[arg(long, value_delimiter = ',', required = true)]
    labels: Vec<String>,
    #[arg(long, default_value_t = semmap::retrieval::DEFAULT_QUERIES)]
    queries: usize,
    #[arg(long, default_value_t = semmap::retrieval::DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report path; when set, the table goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the rendered table here.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricKind {
    Breadth,
    Distance,
    Novelty,
    Axis,
    Mixture,
    Perplexity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricChoice {
    L2,
    Cosine,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long, value_enum)]
    metric: MetricKind,
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    space: Option<String>,
    /// name=journal:<title> | name=pmids:<file> | name=emb:<file>; repeatable.
    #[arg(long = "set")]
    sets: Vec<String>,
    #[arg(long, value_enum, default_value_t = MetricChoice::L2)]
    distance: MetricChoice,
    #[arg(long, default_value_t = semmap::metrics::DEFAULT_PERCENTILE)]
    percentile: f64,
    /// Random pairs drawn for the novelty reference distribution.
    #[arg(long, default_value_t = 100_000)]
    reference_pairs: usize,
    #[arg(long, value_delimiter = ',')]
    positive: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    negative: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    archetypes: Vec<String>,
    /// TACS container with per-token losses (perplexity).
    #[arg(long)]
    container: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MapMethod {
    Pca,
    Umap,
}

#[derive(Debug, Args)]
struct ExportMapArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    space: String,
    #[arg(long, default_value_t = 2)]
    dims: usize,
    #[arg(long, value_enum, default_value_t = MapMethod::Pca)]
    method: MapMethod,
    /// Rows used to fit the projection (default: all).
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Encoder bridge executable used by `--method umap`.
    #[arg(long, default_value = "bridge")]
    bridge: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Also require every document to open and close with a special token.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Ingest(a) => commands::ingest(&a),
        Command::Prep(a) => commands::prep(&a),
        Command::Pool(a) => commands::pool(&a),
        Command::FitSpace(a) => commands::fit_space(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Metrics(a) => commands::metrics(&a),
        Command::ExportMap(a) => commands::export_map(&a),
        Command::ValidateContainer(a) => commands::validate_container(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
