//! Community-labeled documents: ingestion, normalization, tokenization and
//! n-gram extraction.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::BufRead;
use std::ops::{Index, IndexMut};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Placeholder token for URLs.
pub const URL_TOKEN: &str = "<url>";
/// Placeholder token for @-mentions.
pub const USER_TOKEN: &str = "<user>";

/// Default n-gram order.
pub const DEFAULT_N_MAX: usize = 3;

/// One of the two communities of a corpus, identified by position.
///
/// `A` is slot 1 and `B` is slot 2. Raw labels and display names live in
/// [`Corpus::labels`] and the application config; the engine itself only
/// ever reasons about positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Community {
    A,
    B,
}

impl Community {
    pub const BOTH: [Community; 2] = [Community::A, Community::B];

    pub fn index(self) -> usize {
        match self {
            Community::A => 0,
            Community::B => 1,
        }
    }

    /// 1-based slot used at API boundaries.
    pub fn position(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_position(position: u8) -> Option<Community> {
        match position {
            1 => Some(Community::A),
            2 => Some(Community::B),
            _ => None,
        }
    }

    pub fn other(self) -> Community {
        match self {
            Community::A => Community::B,
            Community::B => Community::A,
        }
    }
}

impl From<Community> for u8 {
    fn from(c: Community) -> u8 {
        c.position()
    }
}

impl TryFrom<u8> for Community {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Community::from_position(value).ok_or_else(|| format!("community slot must be 1 or 2, got {value}"))
    }
}

impl fmt::Display for Community {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.position())
    }
}

/// A pair of values, one per community.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PerCommunity<T>(pub [T; 2]);

impl<T> PerCommunity<T> {
    pub fn new(a: T, b: T) -> Self {
        PerCommunity([a, b])
    }

    pub fn from_fn(mut f: impl FnMut(Community) -> T) -> Self {
        PerCommunity([f(Community::A), f(Community::B)])
    }

    pub fn map<'a, U>(&'a self, mut f: impl FnMut(&'a T) -> U) -> PerCommunity<U> {
        PerCommunity([f(&self.0[0]), f(&self.0[1])])
    }

    /// The same values with the two slots exchanged.
    pub fn swapped(self) -> Self {
        let [a, b] = self.0;
        PerCommunity([b, a])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Community, &T)> {
        Community::BOTH.into_iter().zip(self.0.iter())
    }
}

impl<T> Index<Community> for PerCommunity<T> {
    type Output = T;

    fn index(&self, c: Community) -> &T {
        &self.0[c.index()]
    }
}

impl<T> IndexMut<Community> for PerCommunity<T> {
    fn index_mut(&mut self, c: Community) -> &mut T {
        &mut self.0[c.index()]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub community: Community,
    /// `tokenize(normalize(text))`, cached at ingestion.
    pub tokens: Vec<String>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>, community: Community) -> Self {
        let text = text.into();
        let tokens = tokenize(&normalize(&text));
        Document { doc_id: doc_id.into(), text, community, tokens }
    }
}

/// An immutable, ingested collection of documents.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "CorpusRepr", into = "CorpusRepr")]
pub struct Corpus {
    labels: PerCommunity<String>,
    documents: Vec<Document>,
    counts: PerCommunity<usize>,
    by_id: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct CorpusRepr {
    labels: PerCommunity<String>,
    documents: Vec<Document>,
}

impl From<CorpusRepr> for Corpus {
    fn from(repr: CorpusRepr) -> Self {
        Corpus::from_documents(repr.labels, repr.documents)
    }
}

impl From<Corpus> for CorpusRepr {
    fn from(corpus: Corpus) -> Self {
        CorpusRepr { labels: corpus.labels, documents: corpus.documents }
    }
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels && self.documents == other.documents
    }
}

impl Corpus {
    /// Assembles a corpus from already-built documents.
    ///
    /// Later documents with an already-seen `doc_id` are dropped.
    pub fn from_documents(labels: PerCommunity<String>, documents: Vec<Document>) -> Self {
        let mut by_id = HashMap::with_capacity(documents.len());
        let mut kept = Vec::with_capacity(documents.len());
        let mut counts = PerCommunity::new(0, 0);
        for doc in documents {
            if by_id.contains_key(&doc.doc_id) {
                continue;
            }
            by_id.insert(doc.doc_id.clone(), kept.len() as u32);
            counts[doc.community] += 1;
            kept.push(doc);
        }
        Corpus { labels, documents: kept, counts, by_id }
    }

    /// Raw community labels as they appear in the source data.
    pub fn labels(&self) -> &PerCommunity<String> {
        &self.labels
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn counts(&self) -> PerCommunity<usize> {
        self.counts
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Document by dense ordinal (ingestion position).
    pub fn get(&self, ordinal: u32) -> &Document {
        &self.documents[ordinal as usize]
    }

    pub fn ordinal_of(&self, doc_id: &str) -> Option<u32> {
        self.by_id.get(doc_id).copied()
    }

    pub fn find(&self, doc_id: &str) -> Option<&Document> {
        self.ordinal_of(doc_id).map(|o| self.get(o))
    }

    /// The same documents with the two communities exchanged.
    pub fn relabeled(&self) -> Corpus {
        let documents =
            self.documents.iter().map(|d| Document { community: d.community.other(), ..d.clone() }).collect();
        Corpus::from_documents(self.labels.clone().swapped(), documents)
    }
}

/// Field names used to read records.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    pub id: String,
    pub text: String,
    pub community: String,
}

impl Default for Schema {
    fn default() -> Self {
        Schema { id: "id".into(), text: "text".into(), community: "community".into() }
    }
}

#[derive(Clone, Debug, Default)]
pub struct IngestOptions {
    pub schema: Schema,
    /// Raw labels for slots 1 and 2. When absent, slots are assigned in
    /// order of first appearance.
    pub labels: Option<[String; 2]>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum SkipReason {
    InvalidUtf8,
    MalformedJson,
    MissingField(String),
    DuplicateId,
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkipReason::InvalidUtf8 => write!(f, "invalid UTF-8"),
            SkipReason::MalformedJson => write!(f, "malformed JSON"),
            SkipReason::MissingField(name) => write!(f, "missing or non-string field `{name}`"),
            SkipReason::DuplicateId => write!(f, "duplicate id"),
        }
    }
}

/// What happened during ingestion, for the operator.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub skipped: usize,
    pub skipped_by_reason: BTreeMap<String, usize>,
    /// First few skipped lines (1-based line number, reason).
    pub examples: Vec<(usize, SkipReason)>,
}

const MAX_SKIP_EXAMPLES: usize = 20;

impl IngestReport {
    fn skip(&mut self, line: usize, reason: SkipReason) {
        self.skipped += 1;
        *self.skipped_by_reason.entry(reason.to_string()).or_default() += 1;
        if self.examples.len() < MAX_SKIP_EXAMPLES {
            self.examples.push((line, reason));
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no valid records in input")]
    Empty,
    #[error("more than two distinct community values: {0:?}")]
    TooManyCommunities(Vec<String>),
    #[error("only one community present ({0:?}); exactly two are required")]
    SingleCommunity(String),
    #[error("n-gram order must be at least 1")]
    InvalidOrder,
    #[error("read error: {0}")]
    Io(#[from] std::io::Error),
}

/// Reads line-delimited JSON records into a corpus.
///
/// Malformed lines are skipped and reported; a third community value or an
/// input without any valid record is fatal.
pub fn ingest<R: BufRead>(mut reader: R, options: &IngestOptions) -> Result<(Corpus, IngestReport), CorpusError> {
    let schema = &options.schema;
    let mut labels: Vec<String> = options.labels.iter().flatten().cloned().collect();
    let fixed_labels = options.labels.is_some();
    let mut report = IngestReport::default();
    let mut documents = Vec::new();
    let mut seen_ids: HashMap<String, ()> = HashMap::new();
    let mut buf = Vec::new();
    let mut line_no = 0usize;

    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = match std::str::from_utf8(&buf) {
            Ok(s) => s.trim_end_matches(['\n', '\r']),
            Err(_) => {
                report.skip(line_no, SkipReason::InvalidUtf8);
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        let record: serde_json::Value = match serde_json::from_str(line) {
            Ok(v @ serde_json::Value::Object(_)) => v,
            _ => {
                report.skip(line_no, SkipReason::MalformedJson);
                continue;
            }
        };
        let id = match record.get(&schema.id) {
            Some(serde_json::Value::String(s)) => s.clone(),
            Some(serde_json::Value::Number(n)) => n.to_string(),
            _ => {
                report.skip(line_no, SkipReason::MissingField(schema.id.clone()));
                continue;
            }
        };
        let Some(text) = record.get(&schema.text).and_then(|v| v.as_str()) else {
            report.skip(line_no, SkipReason::MissingField(schema.text.clone()));
            continue;
        };
        let Some(label) = record.get(&schema.community).and_then(|v| v.as_str()) else {
            report.skip(line_no, SkipReason::MissingField(schema.community.clone()));
            continue;
        };
        let slot = match labels.iter().position(|l| l == label) {
            Some(slot) => slot,
            None if !fixed_labels && labels.len() < 2 => {
                labels.push(label.to_string());
                labels.len() - 1
            }
            None => {
                let mut found = labels.clone();
                found.push(label.to_string());
                return Err(CorpusError::TooManyCommunities(found));
            }
        };
        if seen_ids.insert(id.clone(), ()).is_some() {
            report.skip(line_no, SkipReason::DuplicateId);
            continue;
        }
        let community = if slot == 0 { Community::A } else { Community::B };
        documents.push(Document::new(id, text, community));
    }

    if documents.is_empty() {
        return Err(CorpusError::Empty);
    }
    if labels.len() < 2 {
        return Err(CorpusError::SingleCommunity(labels.remove(0)));
    }
    report.accepted = documents.len();
    let labels = PerCommunity::new(labels[0].clone(), labels[1].clone());
    Ok((Corpus::from_documents(labels, documents), report))
}

static URL_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:https?://|www\.)\S+").unwrap());
static HASHTAG_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#+(\w)").unwrap());
static MENTION_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(^|[^\w@])@+\w+").unwrap());

fn normalize_pass(text: &str) -> String {
    // Simple (one-to-one) lowercase mapping; multi-char expansions keep their first char.
    let lowered: String = text.chars().map(|c| c.to_lowercase().next().unwrap_or(c)).collect();
    let s = URL_RE.replace_all(&lowered, " <url> ");
    let s = HASHTAG_RE.replace_all(&s, "$1");
    let s = MENTION_RE.replace_all(&s, "$1 <user> ");
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lowercases, masks URLs and mentions, strips hashtag marks and collapses
/// whitespace. Idempotent.
pub fn normalize(text: &str) -> String {
    let mut current = normalize_pass(text);
    loop {
        let next = normalize_pass(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

/// Small English function-word list, sorted for binary search.
const STOPWORDS: &[&str] = &[
    "a", "about", "after", "again", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be", "because",
    "been", "before", "being", "but", "by", "can", "could", "did", "do", "does", "doing", "don't", "down", "for",
    "from", "get", "got", "had", "has", "have", "he", "her", "here", "him", "his", "how", "i", "i'm", "if", "in",
    "into", "is", "it", "it's", "its", "just", "me", "more", "most", "my", "no", "not", "now", "of", "on", "one",
    "only", "or", "other", "our", "out", "over", "rt", "she", "so", "some", "than", "that", "the", "their", "them",
    "then", "there", "these", "they", "this", "those", "to", "too", "up", "us", "very", "was", "we", "were", "what",
    "when", "where", "which", "who", "why", "will", "with", "would", "you", "your",
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

pub fn is_sentinel(token: &str) -> bool {
    token == URL_TOKEN || token == USER_TOKEN
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

/// Splits normalized text into tokens.
///
/// Leading/trailing punctuation is stripped (internal punctuation such as
/// the apostrophe in "don't" survives); punctuation-only tokens vanish.
pub fn tokenize(normalized: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for raw in normalized.split_whitespace() {
        let inner = raw.trim_matches(|c: char| is_punct(c) && c != '<' && c != '>');
        if is_sentinel(inner) {
            tokens.push(inner.to_string());
            continue;
        }
        let token = raw.trim_matches(is_punct);
        if !token.is_empty() {
            tokens.push(token.to_string());
        }
    }
    tokens
}

/// A contiguous token sequence; `surface` is its space-joined form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Ngram {
    pub surface: String,
}

impl Ngram {
    pub fn from_tokens<S: AsRef<str>>(tokens: &[S]) -> Ngram {
        let surface = tokens.iter().map(|t| t.as_ref()).collect::<Vec<_>>().join(" ");
        Ngram { surface }
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.surface.split(' ')
    }

    pub fn len(&self) -> usize {
        self.tokens().count()
    }

    pub fn is_empty(&self) -> bool {
        self.surface.is_empty()
    }
}

impl fmt::Display for Ngram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface)
    }
}

/// `(start, len)` spans of every n-gram with `1 <= len <= n_max`, ordered by
/// start then length. Spans of length ≥ 2 never contain a sentinel.
pub fn ngram_spans<S: AsRef<str>>(tokens: &[S], n_max: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..tokens.len()).flat_map(move |start| {
        let mut len = 0;
        std::iter::from_fn(move || {
            len += 1;
            if len > n_max || start + len > tokens.len() {
                return None;
            }
            if len >= 2 && tokens[start..start + len].iter().any(|t| is_sentinel(t.as_ref())) {
                return None;
            }
            Some((start, len))
        })
    })
}

/// All contiguous n-grams for n = 1..=n_max, in document order.
pub fn extract_ngrams<S: AsRef<str>>(tokens: &[S], n_max: usize) -> Result<Vec<Ngram>, CorpusError> {
    if n_max < 1 {
        return Err(CorpusError::InvalidOrder);
    }
    Ok(ngram_spans(tokens, n_max).map(|(start, len)| Ngram::from_tokens(&tokens[start..start + len])).collect())
}
