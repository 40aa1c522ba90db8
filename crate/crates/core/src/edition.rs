//! The printable dictionary: one entry per curated term with per-community
//! summaries and neutral alternatives, rendered as Markdown or standalone HTML.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::clock::Clock;
use crate::corpus::{Community, PerCommunity};
use crate::curation::CuratedTerm;
use crate::index::{InvertedIndex, TermStats};
use crate::rag::{parse_alternatives, sample_matches, GenerationError, GenerationKind, GenerationRequest, Generator};

pub const MARKDOWN_FILE: &str = "bridging-dictionary.md";
pub const HTML_FILE: &str = "bridging-dictionary.html";

#[derive(Debug, Error)]
pub enum EditionError {
    #[error("no curated terms to assemble")]
    Empty,
    #[error("generation failed for every term:\n{}", format_errata(.0))]
    AllFailed(Vec<Erratum>),
    #[error("could not start worker pool: {0}")]
    Pool(String),
    #[error("unknown format {0:?} (expected markdown or html)")]
    UnknownFormat(String),
}

fn format_errata(errata: &[Erratum]) -> String {
    errata.iter().map(|e| format!("  {}: {}", e.term, e.reason)).collect::<Vec<_>>().join("\n")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Erratum {
    pub term: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DictionaryEntry {
    pub term: CuratedTerm,
    /// One summary per community, slot order.
    pub summaries: PerCommunity<String>,
    pub alternatives: Vec<String>,
    pub stats_line: String,
    /// Documents each summary was generated from.
    pub provenance: PerCommunity<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontMatter {
    pub title: String,
    pub dataset: String,
    pub generated_at: String,
    pub config_digest: String,
    pub display_names: PerCommunity<String>,
    pub backend_id: String,
    pub model_id: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaperEdition {
    pub front_matter: FrontMatter,
    /// Alphabetical by surface, no duplicates.
    pub entries: Vec<DictionaryEntry>,
    pub errata: Vec<Erratum>,
}

#[derive(Clone, Debug)]
pub struct EditionOptions {
    pub title: String,
    pub dataset: String,
    pub display_names: PerCommunity<String>,
    pub config_digest: String,
    pub sample_cap: usize,
    pub model_id: String,
    pub seed: u64,
    pub clock: Clock,
}

/// Hex sha256 of a value's JSON form.
pub fn config_digest<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("configuration serializes");
    hex::encode(Sha256::digest(json))
}

fn fmt_sentiment(value: Option<f64>) -> String {
    value.map_or_else(|| "n/a".to_string(), |v| format!("{v:+.2}"))
}

/// "<name>: <rate> per 1k docs, sentiment <mean>" for both communities.
pub fn stats_line(stats: &TermStats, names: &PerCommunity<String>) -> String {
    Community::BOTH
        .iter()
        .map(|&c| {
            format!(
                "{}: {:.1} per 1k docs, sentiment {}",
                names[c],
                stats.rate_per_k[c],
                fmt_sentiment(stats.sentiment_mean[c])
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn build_entry(
    index: &InvertedIndex,
    term: &CuratedTerm,
    generator: &Generator,
    options: &EditionOptions,
) -> Result<DictionaryEntry, String> {
    let samples = Community::BOTH
        .into_iter()
        .map(|c| sample_matches(index, &term.term, c, options.sample_cap, options.seed))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let run = |request: GenerationRequest| -> Result<_, GenerationError> {
        generator.cached_generate(&request).map(|g| g.result)
    };
    let mut summaries = Vec::with_capacity(2);
    for set in &samples {
        let request = GenerationRequest::single(GenerationKind::Summary, set.clone(), &options.model_id, options.seed);
        let result = run(request).map_err(|e| format!("summary for community {}: {e}", set.community))?;
        summaries.push(result);
    }
    let request =
        GenerationRequest::alternatives(samples[0].clone(), samples[1].clone(), &options.model_id, options.seed);
    let alternatives = run(request).map_err(|e| format!("alternatives: {e}"))?;
    let [a, b] = <[_; 2]>::try_from(summaries).expect("two communities");
    Ok(DictionaryEntry {
        stats_line: stats_line(&term.stats, &options.display_names),
        summaries: PerCommunity::new(a.output, b.output),
        alternatives: parse_alternatives(&alternatives.output),
        provenance: PerCommunity::new(a.provenance, b.provenance),
        term: term.clone(),
    })
}

/// Generates every entry, running at most the generator's parallelism
/// terms at once. Terms whose generation fails become errata.
pub fn assemble(
    index: &InvertedIndex,
    curated: &[CuratedTerm],
    generator: &Generator,
    options: &EditionOptions,
) -> Result<PaperEdition, EditionError> {
    if curated.is_empty() {
        return Err(EditionError::Empty);
    }
    let mut terms: Vec<&CuratedTerm> = curated.iter().collect();
    terms.sort_by(|a, b| a.term.cmp(&b.term));
    terms.dedup_by(|a, b| a.term == b.term);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(generator.settings().parallelism.max(1))
        .build()
        .map_err(|e| EditionError::Pool(e.to_string()))?;
    let outcomes: Vec<Result<DictionaryEntry, Erratum>> = pool.install(|| {
        terms
            .par_iter()
            .map(|t| {
                build_entry(index, t, generator, options).map_err(|reason| Erratum { term: t.term.clone(), reason })
            })
            .collect()
    });

    let mut entries = Vec::new();
    let mut errata = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(entry) => entries.push(entry),
            Err(erratum) => {
                tracing::warn!(term = %erratum.term, reason = %erratum.reason, "term moved to errata");
                errata.push(erratum);
            }
        }
    }
    if entries.is_empty() {
        return Err(EditionError::AllFailed(errata));
    }
    Ok(PaperEdition {
        front_matter: FrontMatter {
            title: options.title.clone(),
            dataset: options.dataset.clone(),
            generated_at: options.clock.timestamp(),
            config_digest: options.config_digest.clone(),
            display_names: options.display_names.clone(),
            backend_id: generator.backend_id().to_string(),
            model_id: options.model_id.clone(),
            seed: options.seed,
        },
        entries,
        errata,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Markdown,
    Html,
}

impl FromStr for Format {
    type Err = EditionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(Format::Markdown),
            "html" => Ok(Format::Html),
            _ => Err(EditionError::UnknownFormat(s.to_string())),
        }
    }
}

pub fn render(edition: &PaperEdition, format: Format) -> String {
    match format {
        Format::Markdown => render_markdown(edition),
        Format::Html => render_html(edition),
    }
}

fn trigger_name(term: &CuratedTerm) -> &'static str {
    match term.score.trigger {
        crate::curation::Trigger::Frequency => "frequency",
        crate::curation::Trigger::Sentiment => "sentiment",
        crate::curation::Trigger::Both => "frequency and sentiment",
    }
}

fn render_markdown(edition: &PaperEdition) -> String {
    let fm = &edition.front_matter;
    let mut out = String::new();
    let _ = writeln!(out, "# {}\n", fm.title);
    if !fm.dataset.is_empty() {
        let _ = writeln!(out, "{}\n", fm.dataset);
    }
    let _ = writeln!(out, "- Generated: {}", fm.generated_at);
    let _ = writeln!(out, "- Configuration digest: `{}`", fm.config_digest);
    let _ = writeln!(out, "- Backend: {} (model {}, seed {})", fm.backend_id, fm.model_id, fm.seed);
    let _ = writeln!(out, "- Entries: {}", edition.entries.len());
    for entry in &edition.entries {
        let _ = writeln!(out, "\n## {}\n", entry.term.term);
        let _ = writeln!(out, "*{}. Divergent by {}.*\n", entry.stats_line, trigger_name(&entry.term));
        for c in Community::BOTH {
            let _ = writeln!(out, "### {}\n\n{}\n", fm.display_names[c], entry.summaries[c]);
        }
        out.push_str("### Alternatives\n\n");
        if entry.alternatives.is_empty() {
            out.push_str("(none suggested)\n");
        }
        for alt in &entry.alternatives {
            let _ = writeln!(out, "- {alt}");
        }
    }
    if !edition.errata.is_empty() {
        out.push_str("\n## Errata\n\n");
        for e in &edition.errata {
            let _ = writeln!(out, "- {}: {}", e.term, e.reason);
        }
    }
    out
}

const PRINT_CSS: &str = "\
body { font-family: Georgia, 'Times New Roman', serif; max-width: 46rem; margin: 2rem auto; padding: 0 1rem; line-height: 1.45; color: #111; }
header { border-bottom: 2px solid #111; margin-bottom: 1.5rem; }
header dl { display: grid; grid-template-columns: max-content 1fr; gap: 0.2rem 1rem; font-size: 0.9rem; }
header dt { font-weight: bold; }
article.entry { margin: 1.5rem 0; padding-bottom: 1rem; border-bottom: 1px solid #ccc; }
article.entry h2 { margin-bottom: 0.2rem; }
p.stats { font-style: italic; color: #444; margin-top: 0; }
.summaries { display: grid; grid-template-columns: 1fr 1fr; gap: 1rem; }
.summaries h3, .alternatives h3 { font-size: 1rem; margin: 0.5rem 0 0.2rem; }
.summary-text { white-space: pre-wrap; margin: 0; }
code { font-size: 0.85em; }
@media print {
  body { margin: 0; max-width: none; font-size: 10.5pt; }
  article.entry { break-inside: avoid; page-break-inside: avoid; }
  header { page-break-after: always; }
}
";

fn esc(text: &str) -> String {
    html_escape::encode_text(text).into_owned()
}

fn render_html(edition: &PaperEdition) -> String {
    let fm = &edition.front_matter;
    let mut out = String::new();
    let _ = write!(
        out,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n<style>\n{}</style>\n</head>\n<body>\n",
        esc(&fm.title),
        PRINT_CSS
    );
    let _ = writeln!(out, "<header>\n<h1>{}</h1>", esc(&fm.title));
    if !fm.dataset.is_empty() {
        let _ = writeln!(out, "<p>{}</p>", esc(&fm.dataset));
    }
    let _ = writeln!(
        out,
        "<dl>\n<dt>Generated</dt><dd>{}</dd>\n<dt>Configuration digest</dt><dd><code>{}</code></dd>\n<dt>Backend</dt><dd>{} (model {}, seed {})</dd>\n<dt>Entries</dt><dd>{}</dd>\n</dl>\n</header>",
        esc(&fm.generated_at),
        esc(&fm.config_digest),
        esc(&fm.backend_id),
        esc(&fm.model_id),
        fm.seed,
        edition.entries.len()
    );
    for entry in &edition.entries {
        let _ = writeln!(out, "<article class=\"entry\">\n<h2>{}</h2>", esc(&entry.term.term));
        let _ = writeln!(
            out,
            "<p class=\"stats\">{}. Divergent by {}.</p>\n<div class=\"summaries\">",
            esc(&entry.stats_line),
            trigger_name(&entry.term)
        );
        for c in Community::BOTH {
            let _ = writeln!(
                out,
                "<section>\n<h3>{}</h3>\n<p class=\"summary-text\">{}</p>\n</section>",
                esc(&fm.display_names[c]),
                esc(&entry.summaries[c])
            );
        }
        out.push_str("</div>\n<section class=\"alternatives\">\n<h3>Alternatives</h3>\n");
        if entry.alternatives.is_empty() {
            out.push_str("<p>(none suggested)</p>\n");
        } else {
            out.push_str("<ul>\n");
            for alt in &entry.alternatives {
                let _ = writeln!(out, "<li>{}</li>", esc(alt));
            }
            out.push_str("</ul>\n");
        }
        out.push_str("</section>\n</article>\n");
    }
    if !edition.errata.is_empty() {
        out.push_str("<section class=\"errata\">\n<h2>Errata</h2>\n<ul>\n");
        for e in &edition.errata {
            let _ = writeln!(out, "<li><strong>{}</strong>: {}</li>", esc(&e.term), esc(&e.reason));
        }
        out.push_str("</ul>\n</section>\n");
    }
    out.push_str("</body>\n</html>\n");
    out
}
