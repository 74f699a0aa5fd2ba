//! `hybridqa` command line and HTTP service.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hybridqa_core::corpus::{load_articles, Corpus, IngestConfig};
use hybridqa_core::dense::{DenseIndex, HnswParams, ProviderSpec, SearchMode};
use hybridqa_core::engine::{Engine, EngineConfig, SearchStrategy};
use hybridqa_core::eval::{run_experiment, ExperimentSpec};
use hybridqa_core::lexical::Bm25Index;
use hybridqa_core::rag::PipelineConfig;
use hybridqa_core::Parallelism;

pub mod config;
pub mod service;

use config::ServiceConfig;
use service::BoxError;

#[derive(Debug, Parser)]
#[command(name = "hybridqa", version, about = "Hybrid retrieval and question answering over statute articles")]
pub struct Cli {
    /// Run batch work on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Chunk an articles JSONL file into a corpus directory.
    Ingest(IngestArgs),
    /// Build a lexical or dense index over a corpus directory.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Ranked articles for a query, as JSON.
    Search(SearchArgs),
    /// Answer a question with references, as JSON.
    Ask(AskArgs),
    /// Run an evaluation spec and write reports.
    Eval(EvalArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    articles: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// JSON ingest config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    max_chunk_tokens: Option<usize>,
    #[arg(long)]
    overlap: Option<usize>,
    /// One stopword per line.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Regex for section headers in articles without explicit sections.
    #[arg(long)]
    section_pattern: Option<String>,
}

#[derive(Debug, Subcommand)]
enum IndexCommand {
    Lexical {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    Dense(DenseArgs),
}

#[derive(Debug, Args)]
struct DenseArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "mock", value_parser = ["mock", "http"])]
    provider: String,
    #[arg(long, required_if_eq("provider", "http"))]
    endpoint: Option<String>,
    #[arg(long, default_value_t = 64)]
    dimension: usize,
    #[arg(long, default_value = "exact")]
    mode: SearchMode,
    #[arg(long, default_value_t = HnswParams::default().seed)]
    seed: u64,
}

/// Index location: either a service config or explicit directories.
#[derive(Debug, Args)]
struct Location {
    #[arg(long, conflicts_with_all = ["corpus", "lexical", "dense"])]
    config: Option<PathBuf>,
    /// Corpus directory; indexes default to `lexical` and `dense` beside it.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    lexical: Option<PathBuf>,
    #[arg(long)]
    dense: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[arg(long)]
    query: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// lexical, dense, minmax (alias hybrid) or rrf.
    #[arg(long, default_value = "minmax")]
    strategy: SearchStrategy,
    #[arg(long)]
    w_lex: Option<f64>,
    #[arg(long)]
    w_dense: Option<f64>,
    #[command(flatten)]
    location: Location,
}

#[derive(Debug, Args)]
struct AskArgs {
    #[arg(long)]
    query: String,
    #[command(flatten)]
    location: Location,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    config: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    init_tracing();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn init_tracing() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into());
    let _ = tracing_subscriber::fmt()
        .json()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

fn dispatch(cli: Cli) -> Result<(), BoxError> {
    let par = if cli.sequential {
        Parallelism::Sequential
    } else {
        Parallelism::Parallel
    };
    match cli.command {
        Command::Ingest(a) => ingest(a, par),
        Command::Index(IndexCommand::Lexical { corpus, out }) => {
            let corpus = Corpus::load(&corpus)?;
            let index = Bm25Index::build(corpus.chunks())?;
            index.save(&out)?;
            print_json(&serde_json::json!({
                "chunks": index.doc_count(),
                "terms": index.term_count(),
                "out": out,
            }))
        }
        Command::Index(IndexCommand::Dense(a)) => index_dense(a, par),
        Command::Search(a) => {
            let engine = open(&a.location, |p| {
                if let Some(w) = a.w_lex {
                    p.fusion.w_lexical = w;
                }
                if let Some(w) = a.w_dense {
                    p.fusion.w_dense = w;
                }
            })?;
            print_json(&engine.search(&a.query, a.k, a.strategy)?)
        }
        Command::Ask(a) => {
            let engine = open(&a.location, |_| {})?;
            print_json(&engine.ask(&a.query)?)
        }
        Command::Eval(a) => {
            let mut spec = ExperimentSpec::load(&a.spec)?;
            if cli.sequential {
                spec.options.parallelism = Parallelism::Sequential;
            }
            let evaluation = run_experiment(&spec)?;
            evaluation.write(&a.out)?;
            println!("{}", evaluation.report.to_table());
            Ok(())
        }
        Command::Serve(a) => {
            let config = ServiceConfig::load(&a.config)?;
            tokio::runtime::Runtime::new()?.block_on(service::serve(config))
        }
    }
}

fn ingest(a: IngestArgs, par: Parallelism) -> Result<(), BoxError> {
    let mut cfg: IngestConfig = match &a.config {
        Some(p) => serde_json::from_str(&read(p)?)?,
        None => IngestConfig::default(),
    };
    if let Some(n) = a.max_chunk_tokens {
        cfg.chunking.max_chunk_tokens = n;
    }
    if let Some(n) = a.overlap {
        cfg.chunking.overlap_tokens = n;
    }
    if let Some(p) = &a.stopwords {
        cfg.stopwords = read(p)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_owned)
            .collect();
    }
    if a.section_pattern.is_some() {
        cfg.section_pattern = a.section_pattern;
    }
    let corpus = Corpus::build(load_articles(&a.articles)?, cfg, par)?;
    corpus.save(&a.out)?;
    print_json(&serde_json::json!({
        "articles": corpus.articles().len(),
        "chunks": corpus.chunks().len(),
        "out": a.out,
    }))
}

fn index_dense(a: DenseArgs, par: Parallelism) -> Result<(), BoxError> {
    let spec = match a.provider.as_str() {
        "http" => ProviderSpec::Http {
            endpoint: a.endpoint.unwrap_or_default(),
            dimension: a.dimension,
            timeout_ms: 10_000,
            max_retries: 2,
            backoff_ms: 200,
        },
        _ => ProviderSpec::Mock { dimension: a.dimension },
    };
    let provider = spec.instantiate()?;
    let corpus = Corpus::load(&a.corpus)?;
    let params = HnswParams {
        seed: a.seed,
        ..HnswParams::default()
    };
    let index = DenseIndex::build(corpus.chunks(), provider.as_ref(), a.mode, params, par)?;
    index.save(&a.out)?;
    print_json(&serde_json::json!({
        "chunks": index.len(),
        "dimension": index.dimension(),
        "mode": index.mode(),
        "out": a.out,
    }))
}

fn open(loc: &Location, tweak: impl FnOnce(&mut PipelineConfig)) -> Result<Engine, BoxError> {
    let mut cfg = match (&loc.config, &loc.corpus) {
        (Some(path), _) => ServiceConfig::load(path)?.engine_config(),
        (None, Some(corpus)) => {
            let sibling = |name: &str| corpus.parent().unwrap_or(Path::new(".")).join(name);
            EngineConfig {
                corpus_dir: corpus.clone(),
                lexical_dir: loc.lexical.clone().unwrap_or_else(|| sibling("lexical")),
                dense_dir: loc.dense.clone().unwrap_or_else(|| sibling("dense")),
                embedder: None,
                llm: Default::default(),
                pipeline: PipelineConfig::default(),
            }
        }
        (None, None) => return Err("either --config or --corpus is required".into()),
    };
    tweak(&mut cfg.pipeline);
    cfg.pipeline.validate()?;
    Ok(Engine::open(&cfg)?)
}

fn read(path: &Path) -> Result<String, BoxError> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()).into())
}

fn print_json<T: Serialize>(value: &T) -> Result<(), BoxError> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}
