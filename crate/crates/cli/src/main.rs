use std::fmt::Display;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use qsearch_core::index::IndexError;
use qsearch_core::ingest::{self, Corpus, IngestError, ARTICLES_FILE, QUOTES_FILE, SPEAKERS_FILE};
use qsearch_core::synth::{generate_synthetic_corpus, GenerateError, GeneratorConfig};
use qsearch_core::IndexSet;
use qsearch_server::export::ExportFormat;
use qsearch_server::{parse_request, AppState, ServerConfig};

#[derive(Parser)]
#[command(name = "qsearch", version, about = "Quotation search: corpus pipeline, index and server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic article dump and speaker file.
    Generate {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        articles: usize,
        #[arg(long)]
        speakers: usize,
        /// Distinct quotes (default: twice the article count).
        #[arg(long)]
        quotes: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate an article dump into quotes; writes dumps and a report.
    Ingest {
        #[arg(long)]
        articles: PathBuf,
        #[arg(long)]
        speakers: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the on-disk index from an ingested (or generated) directory.
    Build {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
        /// JSON config file; QS_* environment variables override it.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run one search given as a URL query string.
    Query {
        #[arg(long)]
        index: PathBuf,
        query: String,
        /// Omit for the /api/search body; `txt` prints the export text.
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Txt,
}

/// Exit status 1: bad input. Exit status 2: I/O.
enum Failure {
    Invalid(String),
    Io(String),
}

impl Failure {
    fn io(e: impl Display) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io { .. } => Failure::io(e),
            IngestError::Format { .. } => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<IndexError> for Failure {
    fn from(e: IndexError) -> Self {
        match e {
            IndexError::DuplicateId(_) => Failure::Invalid(e.to_string()),
            _ => Failure::io(e),
        }
    }
}

fn emit_json(value: serde_json::Value) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &value).map_err(Failure::io)?;
    writeln!(out).map_err(Failure::io)
}

fn generate(seed: u64, articles: usize, speakers: usize, quotes: Option<usize>, out: &Path) -> Result<(), Failure> {
    let mut config = GeneratorConfig::new(seed, articles, speakers);
    config.n_quotes = quotes;
    let manifest = generate_synthetic_corpus(&config, out).map_err(|e| match e {
        GenerateError::Invalid(_) => Failure::Invalid(e.to_string()),
        GenerateError::Io(inner) => inner.into(),
    })?;
    eprintln!(
        "wrote {} articles, {} occurrences of {} quotes, {} speakers to {}",
        manifest.n_articles,
        manifest.total_occurrences,
        manifest.n_quotes,
        manifest.n_speakers,
        out.display()
    );
    Ok(())
}

fn run_ingest(articles: &Path, speakers: &Path, out: &Path) -> Result<(), Failure> {
    let (corpus, summary) = ingest::ingest(articles, speakers)?;
    ingest::write_corpus(out, &corpus, &summary)?;
    emit_json(serde_json::to_value(&summary).map_err(Failure::io)?)
}

/// An ingested directory has a quote dump; a freshly generated one only
/// has articles and speakers and is aggregated on the fly.
fn load_corpus(dir: &Path) -> Result<Corpus, Failure> {
    if !dir.join(QUOTES_FILE).exists() && dir.join(ARTICLES_FILE).exists() {
        let (corpus, summary) = ingest::ingest(&dir.join(ARTICLES_FILE), &dir.join(SPEAKERS_FILE))?;
        eprintln!(
            "aggregated {} articles into {} quotes",
            summary.article_count, summary.quote_count
        );
        return Ok(corpus);
    }
    Ok(ingest::read_corpus(dir)?)
}

fn build(input: &Path, out: &Path) -> Result<(), Failure> {
    let corpus = load_corpus(input)?;
    let set = IndexSet::build(&corpus)?;
    set.save(out)?;
    eprintln!(
        "indexed {} quotes, {} articles, {} speakers into {}",
        set.quotes.doc_count(),
        set.articles.doc_count(),
        set.speakers.doc_count(),
        out.display()
    );
    Ok(())
}

fn serve(index: Option<PathBuf>, port: Option<u16>, config: Option<PathBuf>) -> Result<(), Failure> {
    let mut cfg = ServerConfig::load(config.as_deref()).map_err(|e| Failure::Invalid(e.to_string()))?;
    if let Some(dir) = index {
        cfg.index_dir = Some(dir);
    }
    if let Some(p) = port {
        cfg.port = p;
    }
    let Some(index_dir) = cfg.index_dir.clone() else {
        return Err(Failure::Invalid("no index directory (use --index or QS_INDEX_DIR)".into()));
    };
    let sink: Box<dyn Write + Send> = match &cfg.request_log {
        Some(path) => Box::new(
            std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?,
        ),
        None => Box::new(std::io::stderr()),
    };
    let addr = SocketAddr::new(cfg.bind, cfg.port);
    let state = AppState::new(cfg).with_log(sink);
    state.load_index(&index_dir)?;
    let runtime = tokio::runtime::Runtime::new().map_err(Failure::io)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| Failure::Io(format!("{addr}: {e}")))?;
        eprintln!("listening on http://{}", listener.local_addr().map_err(Failure::io)?);
        qsearch_server::serve(Arc::new(state), listener).await.map_err(Failure::io)
    })
}

fn query(index: &Path, qs: &str, format: Option<OutputFormat>) -> Result<(), Failure> {
    // Reject malformed queries before touching the index.
    if let Err(v) = parse_request(qs) {
        let msg: Vec<String> = v.iter().map(ToString::to_string).collect();
        return Err(Failure::Invalid(msg.join("; ")));
    }
    let state = AppState::new(ServerConfig::default());
    state.load_index(index)?;
    let (path, qs) = match format {
        None => ("/api/search", qs.to_string()),
        Some(OutputFormat::Json) => ("/api/export", format!("{qs}&format={}", ExportFormat::Json.as_str())),
        Some(OutputFormat::Txt) => ("/api/export", format!("{qs}&format={}", ExportFormat::Txt.as_str())),
    };
    let response = state.handle(path, qs.trim_start_matches('&'));
    match response.status {
        200 => {
            let mut out = std::io::stdout().lock();
            out.write_all(response.body.as_bytes()).map_err(Failure::io)?;
            if path == "/api/search" {
                writeln!(out).map_err(Failure::io)?;
            }
            Ok(())
        }
        400..=499 => Err(Failure::Invalid(response.body)),
        _ => Err(Failure::Io(response.body)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Generate {
            seed,
            articles,
            speakers,
            quotes,
            out,
        } => generate(seed, articles, speakers, quotes, &out),
        Command::Ingest { articles, speakers, out } => run_ingest(&articles, &speakers, &out),
        Command::Build { input, out } => build(&input, &out),
        Command::Serve { index, port, config } => serve(index, port, config),
        Command::Query { index, query: qs, format } => query(&index, &qs, format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
