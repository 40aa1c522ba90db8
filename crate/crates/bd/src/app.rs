//! Pipeline steps shared by the CLI and the server, and the error taxonomy
//! that maps onto process exit codes.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use bd_core::clock::Clock;
use bd_core::corpus::{self, IngestOptions, IngestReport};
use bd_core::curation::{self, CuratedTerm, CurationError};
use bd_core::edition::{self, EditionError, EditionOptions, Format, PaperEdition};
use bd_core::rag::{BlindnessGuard, GenerationCache, GenerationSettings, Generator, LlmBackend, TemplateSet};
use bd_core::sentiment::{SentimentLexicon, BUNDLED_LEXICON};
use bd_core::snapshot::{self, SnapshotError, SourceDigest};
use bd_core::{InvertedIndex, PerCommunity};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{AppConfig, ConfigError};
use crate::llm_http::HttpBackend;

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    MissingInput(String),
    #[error("{0}")]
    Corrupt(String),
    #[error("{0}")]
    Generation(String),
    #[error("{0}")]
    Bind(String),
    #[error("{0}")]
    Other(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) | AppError::Other(_) => 1,
            AppError::MissingInput(_) => 2,
            AppError::Corrupt(_) => 3,
            AppError::Generation(_) => 4,
            AppError::Bind(_) => 5,
        }
    }
}

fn read_input(path: &Path, what: &str) -> Result<Vec<u8>, AppError> {
    fs::read(path).map_err(|e| AppError::MissingInput(format!("cannot read {what} {}: {e}", path.display())))
}

fn create_parent(path: &Path) -> Result<(), AppError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|e| AppError::Other(format!("cannot create {}: {e}", dir.display())))
        }
        _ => Ok(()),
    }
}

/// Lexicon and its raw bytes (which feed the snapshot source digest).
pub fn load_lexicon(config: &AppConfig) -> Result<(SentimentLexicon, Vec<u8>), AppError> {
    let bytes = match &config.lexicon_path {
        Some(p) => read_input(p, "lexicon")?,
        None => BUNDLED_LEXICON.as_bytes().to_vec(),
    };
    let (lexicon, warnings) =
        SentimentLexicon::load(bytes.as_slice()).map_err(|e| AppError::Corrupt(format!("lexicon: {e}")))?;
    for w in warnings {
        tracing::warn!(line = w.line, "lexicon: {}", w.message);
    }
    Ok((lexicon, bytes))
}

/// Digest over everything an index build depends on.
pub fn source_digest(config: &AppConfig, corpus_bytes: &[u8], lexicon_bytes: &[u8]) -> SourceDigest {
    let shape = serde_json::json!({ "schema": config.schema, "labels": config.labels }).to_string();
    let n_max = (config.n_max as u64).to_le_bytes();
    SourceDigest::of_parts([
        ("corpus", corpus_bytes),
        ("lexicon", lexicon_bytes),
        ("schema", shape.as_bytes()),
        ("n_max", &n_max[..]),
    ])
}

pub struct IngestSummary {
    pub report: IngestReport,
    pub docs: PerCommunity<usize>,
    pub labels: PerCommunity<String>,
    pub terms: usize,
    pub snapshot: PathBuf,
    /// SHA-256 of the snapshot file.
    pub snapshot_sha256: String,
}

/// Builds the index from the corpus and writes the snapshot.
pub fn ingest(config: &AppConfig) -> Result<(InvertedIndex, IngestSummary), AppError> {
    let corpus_bytes = read_input(&config.corpus_path, "corpus")?;
    let (lexicon, lexicon_bytes) = load_lexicon(config)?;
    let options = IngestOptions { schema: config.schema.clone(), labels: config.labels.clone() };
    let (corpus, report) = corpus::ingest(corpus_bytes.as_slice(), &options)
        .map_err(|e| AppError::Corrupt(format!("corpus {}: {e}", config.corpus_path.display())))?;
    let index = InvertedIndex::build(corpus, config.n_max, &lexicon).map_err(|e| AppError::Corrupt(e.to_string()))?;
    let digest = source_digest(config, &corpus_bytes, &lexicon_bytes);
    create_parent(&config.paths.snapshot)?;
    snapshot::write(&config.paths.snapshot, &index, digest).map_err(|e| AppError::Other(e.to_string()))?;
    let written = fs::read(&config.paths.snapshot).map_err(|e| AppError::Other(e.to_string()))?;
    let summary = IngestSummary {
        report,
        docs: index.totals(),
        labels: index.corpus().labels().clone(),
        terms: index.term_count(),
        snapshot: config.paths.snapshot.clone(),
        snapshot_sha256: hex::encode(Sha256::digest(&written)),
    };
    Ok((index, summary))
}

/// Loads the snapshot. When the corpus or lexicon changed since it was
/// written, the index is rebuilt first.
pub fn open_index(config: &AppConfig) -> Result<InvertedIndex, AppError> {
    let path = &config.paths.snapshot;
    if !path.exists() {
        return Err(AppError::MissingInput(format!(
            "index snapshot not found at {}; run `bd ingest` first",
            path.display()
        )));
    }
    let expected = match (fs::read(&config.corpus_path), load_lexicon(config)) {
        (Ok(corpus), Ok((_, lexicon))) => Some(source_digest(config, &corpus, &lexicon)),
        _ => {
            tracing::warn!("corpus or lexicon unavailable; loading snapshot without a freshness check");
            None
        }
    };
    match snapshot::read(path, expected) {
        Ok((index, _)) => Ok(index),
        Err(SnapshotError::Stale) => {
            tracing::warn!(snapshot = %path.display(), "snapshot is stale; rebuilding");
            ingest(config).map(|(index, _)| index)
        }
        Err(SnapshotError::Missing(m)) => Err(AppError::MissingInput(m)),
        Err(e @ (SnapshotError::Corrupt(_) | SnapshotError::VersionMismatch { .. })) => {
            Err(AppError::Corrupt(format!("{}: {e}", path.display())))
        }
        Err(e) => Err(AppError::Other(format!("{}: {e}", path.display()))),
    }
}

/// Curates and writes the curated-terms file.
pub fn curate(config: &AppConfig, index: &InvertedIndex) -> Result<Vec<CuratedTerm>, AppError> {
    let terms = curation::curate(index, &config.curation).map_err(|e| AppError::Other(e.to_string()))?;
    let path = &config.paths.curated;
    create_parent(path)?;
    let file = File::create(path).map_err(|e| AppError::Other(format!("cannot write {}: {e}", path.display())))?;
    curation::write_curated(BufWriter::new(file), &terms).map_err(|e| AppError::Other(e.to_string()))?;
    Ok(terms)
}

pub fn read_curated(config: &AppConfig) -> Result<Vec<CuratedTerm>, AppError> {
    let path = &config.paths.curated;
    let file = File::open(path).map_err(|e| {
        AppError::MissingInput(format!("curated-terms file {}: {e}; run `bd curate` first", path.display()))
    })?;
    curation::read_curated(BufReader::new(file)).map_err(|e| match e {
        CurationError::Io(e) => AppError::Other(format!("{}: {e}", path.display())),
        e => AppError::Corrupt(format!("{}: {e}", path.display())),
    })
}

pub fn backend_from_env(config: &AppConfig) -> Result<Arc<dyn LlmBackend>, AppError> {
    HttpBackend::from_env(Duration::from_secs(config.rag.timeout_secs)).map_err(|e| AppError::Other(e.to_string()))
}

/// Generator with the configured templates and cache. The blindness guard
/// covers both the raw labels and the display names.
pub fn build_generator(
    config: &AppConfig,
    index: &InvertedIndex,
    backend: Arc<dyn LlmBackend>,
    clock: Clock,
) -> Result<Generator, AppError> {
    let labels = index.corpus().labels();
    let guard = BlindnessGuard::new(labels.0.iter().chain(&config.display_names));
    let templates = match &config.paths.templates {
        Some(p) => {
            let text = String::from_utf8(read_input(p, "template file")?)
                .map_err(|_| AppError::Corrupt(format!("template file {} is not UTF-8", p.display())))?;
            TemplateSet::parse(&text).map_err(|e| AppError::Corrupt(format!("template file {}: {e}", p.display())))?
        }
        None => TemplateSet::builtin(),
    };
    let cache = GenerationCache::open(&config.paths.cache)
        .map_err(|e| AppError::Other(format!("cache {}: {e}", config.paths.cache.display())))?;
    let settings = GenerationSettings {
        prompt_budget: config.rag.prompt_budget,
        parallelism: config.rag.parallelism,
        ..GenerationSettings::default()
    };
    Ok(Generator::new(backend, guard)
        .with_templates(templates)
        .with_cache(cache)
        .with_settings(settings)
        .with_clock(clock))
}

pub fn edition_options(config: &AppConfig, clock: Clock) -> EditionOptions {
    let dataset = config.paper.dataset.clone().unwrap_or_else(|| {
        config.corpus_path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned())
    });
    EditionOptions {
        title: config.paper.title.clone(),
        dataset,
        display_names: config.display_names(),
        config_digest: edition::config_digest(&config.output_settings()),
        sample_cap: config.rag.cap,
        model_id: config.rag.model_id.clone(),
        seed: config.rag.seed,
        clock,
    }
}

pub fn assemble_edition(
    config: &AppConfig,
    index: &InvertedIndex,
    curated: &[CuratedTerm],
    generator: &Generator,
    clock: Clock,
) -> Result<PaperEdition, AppError> {
    edition::assemble(index, curated, generator, &edition_options(config, clock)).map_err(|e| match e {
        EditionError::Empty => AppError::MissingInput("no curated terms to render".to_string()),
        EditionError::AllFailed(errata) => AppError::Generation(format!(
            "generation failed for every term ({}); first: {}",
            errata.len(),
            errata.first().map_or("", |e| e.reason.as_str())
        )),
        e => AppError::Other(e.to_string()),
    })
}

/// Writes the Markdown and HTML renderings; returns their paths.
pub fn write_edition(config: &AppConfig, edition: &PaperEdition) -> Result<[PathBuf; 2], AppError> {
    let dir = &config.paths.output_dir;
    fs::create_dir_all(dir).map_err(|e| AppError::Other(format!("cannot create {}: {e}", dir.display())))?;
    let paths = [dir.join(edition::MARKDOWN_FILE), dir.join(edition::HTML_FILE)];
    for (path, format) in paths.iter().zip([Format::Markdown, Format::Html]) {
        fs::write(path, edition::render(edition, format))
            .map_err(|e| AppError::Other(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(paths)
}
