//! N-gram inverted index and per-term community statistics.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap, HashSet};

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::corpus::{self, is_sentinel, ngram_spans, Community, Corpus, PerCommunity};
use crate::sentiment::SentimentScorer;

/// Sorted, duplicate-free document ordinals per community.
pub type Postings = PerCommunity<Vec<u32>>;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum IndexError {
    #[error("community {0} has no documents")]
    EmptyCommunity(Community),
    #[error("n-gram order must be at least 1")]
    InvalidOrder,
    #[error("empty query")]
    EmptyQuery,
    #[error("sample cap must be at least 1")]
    InvalidSampleCap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    corpus: Corpus,
    n_max: usize,
    postings: BTreeMap<String, Postings>,
    totals: PerCommunity<usize>,
    /// Document sentiment by ordinal.
    sentiment: Vec<f64>,
}

impl InvertedIndex {
    /// Indexes every n-gram up to `n_max` and caches per-document sentiment.
    pub fn build(corpus: Corpus, n_max: usize, scorer: &dyn SentimentScorer) -> Result<Self, IndexError> {
        if n_max < 1 {
            return Err(IndexError::InvalidOrder);
        }
        let totals = corpus.counts();
        for c in Community::BOTH {
            if totals[c] == 0 {
                return Err(IndexError::EmptyCommunity(c));
            }
        }

        let mut postings: HashMap<String, Postings> = HashMap::new();
        let mut sentiment = Vec::with_capacity(corpus.len());
        let mut seen: HashSet<&[String]> = HashSet::new();
        for (ordinal, doc) in corpus.documents().iter().enumerate() {
            let ordinal = ordinal as u32;
            sentiment.push(scorer.score_tokens(&doc.tokens).value());
            seen.clear();
            for (start, len) in ngram_spans(&doc.tokens, n_max) {
                let gram = &doc.tokens[start..start + len];
                if !seen.insert(gram) {
                    continue;
                }
                let list = &mut postings.entry(gram.join(" ")).or_default()[doc.community];
                // Ordinals arrive in increasing order, so lists stay sorted.
                list.push(ordinal);
            }
        }

        Ok(InvertedIndex { n_max, totals, sentiment, postings: postings.into_iter().collect(), corpus })
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn totals(&self) -> PerCommunity<usize> {
        self.totals
    }

    /// Number of distinct indexed n-grams.
    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &Postings)> {
        self.postings.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn postings(&self, surface: &str) -> Option<&Postings> {
        self.postings.get(surface)
    }

    pub fn sentiment_of(&self, ordinal: u32) -> f64 {
        self.sentiment[ordinal as usize]
    }

    /// Normalizes and tokenizes a user phrase with the corpus rules.
    pub fn query_tokens(phrase: &str) -> Result<Vec<String>, IndexError> {
        let tokens = corpus::tokenize(&corpus::normalize(phrase));
        if tokens.is_empty() {
            return Err(IndexError::EmptyQuery);
        }
        Ok(tokens)
    }

    /// Documents (by ordinal) containing `tokens` as a contiguous run.
    pub fn matching_docs(&self, tokens: &[String]) -> PerCommunity<Cow<'_, [u32]>> {
        let direct = !tokens.is_empty()
            && tokens.len() <= self.n_max
            && (tokens.len() == 1 || !tokens.iter().any(|t| is_sentinel(t)));
        if direct {
            return match self.postings.get(&tokens.join(" ")) {
                Some(p) => PerCommunity::from_fn(|c| Cow::Borrowed(p[c].as_slice())),
                None => PerCommunity::new(Cow::Borrowed(&[][..]), Cow::Borrowed(&[][..])),
            };
        }
        PerCommunity::from_fn(|c| Cow::Owned(self.scan_candidates(tokens, c)))
    }

    /// Intersects unigram postings, then verifies the phrase positionally.
    fn scan_candidates(&self, tokens: &[String], community: Community) -> Vec<u32> {
        let mut lists: Vec<&[u32]> = Vec::new();
        let mut unique: Vec<&String> = tokens.iter().collect();
        unique.sort();
        unique.dedup();
        for token in unique {
            match self.postings.get(token.as_str()) {
                Some(p) => lists.push(&p[community]),
                None => return Vec::new(),
            }
        }
        lists.sort_by_key(|l| l.len());
        let mut candidates: Vec<u32> = lists[0].to_vec();
        for other in &lists[1..] {
            candidates.retain(|o| other.binary_search(o).is_ok());
        }
        candidates.retain(|&o| self.corpus.get(o).tokens.windows(tokens.len()).any(|w| w == tokens));
        candidates
    }

    /// Statistics-panel numbers for a raw user phrase.
    pub fn term_stats(&self, phrase: &str) -> Result<TermStats, IndexError> {
        let tokens = Self::query_tokens(phrase)?;
        let docs = self.matching_docs(&tokens);
        Ok(self.stats_for(tokens.join(" "), &docs.map(|d| d.as_ref())))
    }

    /// Statistics for an already-resolved posting pair.
    pub fn stats_for(&self, term: String, docs: &PerCommunity<&[u32]>) -> TermStats {
        let counts = docs.map(|d| d.len() as u64);
        let sums = docs.map(|d| d.iter().map(|&o| self.sentiment_of(o)).sum::<f64>());
        TermStats::from_parts(term, counts, self.totals.map(|&t| t as u64), sums)
    }
}

/// Per-community usage statistics for one term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermStats {
    pub term: String,
    /// Matching documents per community.
    pub doc_count: PerCommunity<u64>,
    /// Matching documents per 1,000 documents of the community.
    pub rate_per_k: PerCommunity<f64>,
    /// Share of matching documents per community; absent with no matches.
    pub share: Option<PerCommunity<f64>>,
    /// Mean document sentiment over matches; absent for a side with none.
    pub sentiment_mean: PerCommunity<Option<f64>>,
}

impl TermStats {
    pub fn from_parts(
        term: String,
        doc_count: PerCommunity<u64>,
        totals: PerCommunity<u64>,
        sentiment_sums: PerCommunity<f64>,
    ) -> TermStats {
        let rate_per_k =
            PerCommunity::from_fn(
                |c| if totals[c] == 0 { 0.0 } else { 1000.0 * doc_count[c] as f64 / totals[c] as f64 },
            );
        let all = doc_count[Community::A] + doc_count[Community::B];
        let share = (all > 0).then(|| PerCommunity::from_fn(|c| doc_count[c] as f64 / all as f64));
        let sentiment_mean =
            PerCommunity::from_fn(|c| (doc_count[c] > 0).then(|| sentiment_sums[c] / doc_count[c] as f64));
        TermStats { term, doc_count, rate_per_k, share, sentiment_mean }
    }

    /// Deltas (A − B) and which community leads on each measure.
    pub fn compare(&self) -> ComparativeView {
        let rate_delta = self.rate_per_k[Community::A] - self.rate_per_k[Community::B];
        let sentiment_delta = match (self.sentiment_mean[Community::A], self.sentiment_mean[Community::B]) {
            (Some(a), Some(b)) => Some(a - b),
            _ => None,
        };
        ComparativeView {
            higher_rate: Leader::from_delta(rate_delta),
            higher_sentiment: sentiment_delta.map(Leader::from_delta),
            rate_delta,
            sentiment_delta,
        }
    }
}

/// Which community scores higher on a measure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Leader {
    Community(Community),
    Tie,
}

impl Leader {
    fn from_delta(delta: f64) -> Leader {
        if delta > 0.0 {
            Leader::Community(Community::A)
        } else if delta < 0.0 {
            Leader::Community(Community::B)
        } else {
            Leader::Tie
        }
    }
}

/// Serialized as the community slot number, or `"tie"`.
impl Serialize for Leader {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Leader::Community(c) => serializer.serialize_u8(c.position()),
            Leader::Tie => serializer.serialize_str("tie"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparativeView {
    pub higher_rate: Leader,
    /// `None` when either side has no sentiment.
    pub higher_sentiment: Option<Leader>,
    pub rate_delta: f64,
    pub sentiment_delta: Option<f64>,
}

impl Serialize for ComparativeView {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(4))?;
        map.serialize_entry("higher_rate", &self.higher_rate)?;
        match &self.higher_sentiment {
            Some(leader) => map.serialize_entry("higher_sentiment", leader)?,
            None => map.serialize_entry("higher_sentiment", "undefined")?,
        }
        map.serialize_entry("rate_delta", &self.rate_delta)?;
        map.serialize_entry("sentiment_delta", &self.sentiment_delta)?;
        map.end()
    }
}
