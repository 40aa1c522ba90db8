//! Selection of terms that both communities use often enough but in
//! measurably different ways: usage frequency (smoothed log-odds z-score)
//! or mean sentiment.

use std::cmp::Ordering;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{is_sentinel, Community, PerCommunity};
use crate::index::{InvertedIndex, TermStats};

/// Weight of the sentiment gap in the ranking key.
pub const SENTIMENT_RANK_WEIGHT: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurationConfig {
    /// Minimum matches per thousand documents, in each community.
    pub min_rate_per_k: f64,
    /// Minimum matching documents, in each community.
    pub min_docs: u64,
    pub freq_z_threshold: f64,
    pub sent_gap_threshold: f64,
    /// Matches required on each side before the sentiment gap counts.
    pub sent_min_docs: u64,
    /// Symmetric Dirichlet smoothing for the log-odds ratio.
    pub prior_alpha: f64,
    pub n_max: usize,
    pub max_terms: Option<usize>,
    pub subsumption_filter: bool,
}

impl Default for CurationConfig {
    fn default() -> Self {
        CurationConfig {
            min_rate_per_k: 0.5,
            min_docs: 20,
            freq_z_threshold: 3.0,
            sent_gap_threshold: 0.35,
            sent_min_docs: 30,
            prior_alpha: 0.5,
            n_max: 3,
            max_terms: None,
            subsumption_filter: true,
        }
    }
}

impl CurationConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN has to fail these checks too
    pub fn validate(&self) -> Result<(), CurationError> {
        let bad = |field: &str, why: &str| Err(CurationError::InvalidConfig(format!("{field} {why}")));
        if !(self.min_rate_per_k >= 0.0) {
            return bad("min_rate_per_k", "must be >= 0");
        }
        if self.min_docs < 1 {
            return bad("min_docs", "must be >= 1");
        }
        if !(self.freq_z_threshold > 0.0) {
            return bad("freq_z_threshold", "must be > 0");
        }
        if !(self.sent_gap_threshold > 0.0) {
            return bad("sent_gap_threshold", "must be > 0");
        }
        if self.sent_min_docs < 1 {
            return bad("sent_min_docs", "must be >= 1");
        }
        if !(self.prior_alpha > 0.0) || !self.prior_alpha.is_finite() {
            return bad("prior_alpha", "must be a finite value > 0");
        }
        if self.n_max < 1 {
            return bad("n_max", "must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("invalid curation config: {0}")]
    InvalidConfig(String),
    #[error("index order {index} is lower than the requested n_max {requested}")]
    IndexTooShallow { index: usize, requested: usize },
    #[error("log-odds precondition violated: {0}")]
    Precondition(String),
    #[error("curated-terms file, line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trigger {
    Frequency,
    Sentiment,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceScore {
    /// Signed: positive when community A uses the term more.
    pub freq_z: f64,
    pub sent_gap: Option<f64>,
    pub trigger: Trigger,
}

impl DivergenceScore {
    /// Recomputes the trigger from the stored score; `None` if no condition holds.
    pub fn trigger_for(freq_z: f64, sent_gap: Option<f64>, config: &CurationConfig) -> Option<Trigger> {
        let by_freq = freq_z.abs() >= config.freq_z_threshold;
        let by_sent = sent_gap.is_some_and(|g| g >= config.sent_gap_threshold);
        match (by_freq, by_sent) {
            (true, true) => Some(Trigger::Both),
            (true, false) => Some(Trigger::Frequency),
            (false, true) => Some(Trigger::Sentiment),
            (false, false) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuratedTerm {
    pub term: String,
    pub stats: TermStats,
    pub score: DivergenceScore,
    pub rank_key: f64,
}

/// z-score of the smoothed log-odds ratio of `y1/n1` against `y2/n2`.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN has to fail these checks too
pub fn log_odds_z(y1: u64, n1: u64, y2: u64, n2: u64, alpha: f64) -> Result<f64, CurationError> {
    if y1 > n1 || y2 > n2 {
        return Err(CurationError::Precondition(format!("counts exceed totals ({y1}/{n1}, {y2}/{n2})")));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(CurationError::Precondition(format!("alpha must be > 0, got {alpha}")));
    }
    let (y1, n1, y2, n2) = (y1 as f64, n1 as f64, y2 as f64, n2 as f64);
    let delta = ((y1 + alpha) / (n1 - y1 + alpha)).ln() - ((y2 + alpha) / (n2 - y2 + alpha)).ln();
    let variance = 1.0 / (y1 + alpha) + 1.0 / (y2 + alpha);
    Ok(delta / variance.sqrt())
}

/// |mean_A − mean_B| when both sides have at least `sent_min_docs` matches.
pub fn sentiment_gap(stats: &TermStats, config: &CurationConfig) -> Option<f64> {
    if Community::BOTH.iter().any(|&c| stats.doc_count[c] < config.sent_min_docs) {
        return None;
    }
    match (stats.sentiment_mean[Community::A], stats.sentiment_mean[Community::B]) {
        (Some(a), Some(b)) => Some((a - b).abs()),
        _ => None,
    }
}

fn check_depth(index: &InvertedIndex, config: &CurationConfig) -> Result<(), CurationError> {
    config.validate()?;
    if index.n_max() < config.n_max {
        return Err(CurationError::IndexTooShallow { index: index.n_max(), requested: config.n_max });
    }
    Ok(())
}

/// Indexed terms used sufficiently often by both communities, in surface order.
pub fn candidates(index: &InvertedIndex, config: &CurationConfig) -> Result<Vec<TermStats>, CurationError> {
    check_depth(index, config)?;
    let totals = index.totals();
    let min_count = PerCommunity::from_fn(|c| {
        // Smallest count whose rate reaches min_rate_per_k; avoids computing stats for hopeless terms.
        let by_rate = (config.min_rate_per_k * totals[c] as f64 / 1000.0).floor() as u64;
        by_rate.max(config.min_docs)
    });
    let mut out = Vec::new();
    for (surface, postings) in index.terms() {
        if Community::BOTH.iter().any(|&c| (postings[c].len() as u64) < min_count[c]) {
            continue;
        }
        let tokens: Vec<&str> = surface.split(' ').collect();
        if tokens.len() > config.n_max || tokens.iter().any(|t| is_sentinel(t)) {
            continue;
        }
        let stats = index.stats_for(surface.to_string(), &postings.map(|p| p.as_slice()));
        let sufficient = Community::BOTH
            .iter()
            .all(|&c| stats.doc_count[c] >= config.min_docs && stats.rate_per_k[c] >= config.min_rate_per_k);
        if sufficient {
            out.push(stats);
        }
    }
    Ok(out)
}

fn score_term(stats: TermStats, totals: PerCommunity<u64>, config: &CurationConfig) -> Option<CuratedTerm> {
    let (a, b) = (Community::A, Community::B);
    let freq_z = log_odds_z(stats.doc_count[a], totals[a], stats.doc_count[b], totals[b], config.prior_alpha).ok()?;
    let sent_gap = sentiment_gap(&stats, config);
    let trigger = DivergenceScore::trigger_for(freq_z, sent_gap, config)?;
    let rank_key = freq_z.abs() + sent_gap.unwrap_or(0.0) * SENTIMENT_RANK_WEIGHT;
    Some(CuratedTerm {
        term: stats.term.clone(),
        stats,
        score: DivergenceScore { freq_z, sent_gap, trigger },
        rank_key,
    })
}

fn contains_run(longer: &[&str], shorter: &[&str]) -> bool {
    longer.len() > shorter.len() && longer.windows(shorter.len()).any(|w| w == shorter)
}

/// Curated dictionary terms, ranked by divergence.
///
/// Output order: `rank_key` descending, then surface ascending.
pub fn curate(index: &InvertedIndex, config: &CurationConfig) -> Result<Vec<CuratedTerm>, CurationError> {
    let totals = index.totals().map(|&t| t as u64);
    let mut selected: Vec<CuratedTerm> =
        candidates(index, config)?.into_iter().filter_map(|s| score_term(s, totals, config)).collect();

    if config.subsumption_filter {
        let token_lists: Vec<Vec<&str>> = selected.iter().map(|t| t.term.split(' ').collect()).collect();
        let keep: Vec<bool> = (0..selected.len())
            .map(|i| {
                !(0..selected.len()).any(|j| {
                    contains_run(&token_lists[j], &token_lists[i])
                        && selected[j].score.freq_z.abs() >= selected[i].score.freq_z.abs()
                })
            })
            .collect();
        let mut flags = keep.into_iter();
        selected.retain(|_| flags.next().unwrap_or(true));
    }

    selected.sort_by(|x, y| {
        y.rank_key.partial_cmp(&x.rank_key).unwrap_or(Ordering::Equal).then_with(|| x.term.cmp(&y.term))
    });
    if let Some(cap) = config.max_terms {
        selected.truncate(cap);
    }
    Ok(selected)
}

/// Writes one JSON object per line.
pub fn write_curated<W: Write>(mut out: W, terms: &[CuratedTerm]) -> Result<(), CurationError> {
    for term in terms {
        serde_json::to_writer(&mut out, term).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a curated-terms file; blank lines are ignored.
pub fn read_curated<R: BufRead>(reader: R) -> Result<Vec<CuratedTerm>, CurationError> {
    let mut terms = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let term =
            serde_json::from_str(&line).map_err(|e| CurationError::Parse { line: i + 1, message: e.to_string() })?;
        terms.push(term);
    }
    Ok(terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Document};
    use crate::sentiment::SentimentLexicon;

    #[test]
    fn log_odds_symmetry_and_antisymmetry() {
        assert_eq!(log_odds_z(10, 1000, 10, 1000, 0.5).unwrap(), 0.0);
        let z = log_odds_z(30, 1000, 10, 1000, 0.5).unwrap();
        assert!(z > 0.0);
        assert_eq!(log_odds_z(10, 1000, 30, 1000, 0.5).unwrap(), -z);
    }

    #[test]
    fn log_odds_preconditions() {
        assert!(log_odds_z(5, 4, 0, 1, 0.5).is_err());
        assert!(log_odds_z(0, 4, 2, 1, 0.5).is_err());
        assert!(log_odds_z(1, 4, 1, 4, 0.0).is_err());
        assert!(log_odds_z(1, 4, 1, 4, f64::NAN).is_err());
        // Degenerate but valid extremes stay finite thanks to smoothing.
        assert!(log_odds_z(0, 0, 5, 5, 0.5).unwrap().is_finite());
    }

    fn stats(counts: (u64, u64), means: (Option<f64>, Option<f64>)) -> TermStats {
        TermStats {
            term: "t".into(),
            doc_count: PerCommunity::new(counts.0, counts.1),
            rate_per_k: PerCommunity::new(0.0, 0.0),
            share: None,
            sentiment_mean: PerCommunity::new(means.0, means.1),
        }
    }

    #[test]
    fn sentiment_gap_examples() {
        let config = CurationConfig::default();
        let gap = sentiment_gap(&stats((30, 40), (Some(0.4), Some(-0.2))), &config).unwrap();
        assert!((gap - 0.6).abs() < 1e-15);
        assert_eq!(sentiment_gap(&stats((29, 40), (Some(0.4), Some(-0.2))), &config), None);
        assert_eq!(sentiment_gap(&stats((30, 30), (Some(0.1), Some(0.1))), &config), Some(0.0));
    }

    #[test]
    fn trigger_logic() {
        let config = CurationConfig::default();
        assert_eq!(DivergenceScore::trigger_for(3.0, None, &config), Some(Trigger::Frequency));
        assert_eq!(DivergenceScore::trigger_for(-3.5, Some(0.5), &config), Some(Trigger::Both));
        assert_eq!(DivergenceScore::trigger_for(0.1, Some(0.35), &config), Some(Trigger::Sentiment));
        assert_eq!(DivergenceScore::trigger_for(2.9, Some(0.3), &config), None);
    }

    #[test]
    fn config_validation() {
        assert!(CurationConfig::default().validate().is_ok());
        let bad = CurationConfig { min_docs: 0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(CurationError::InvalidConfig(_))));
        let bad = CurationConfig { prior_alpha: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    fn small_index() -> InvertedIndex {
        let mut docs = Vec::new();
        let mut push = |text: &str, c: Community, n: usize| {
            for _ in 0..n {
                let id = format!("d{:05}", docs.len());
                docs.push(Document::new(id, text, c));
            }
        };
        push("climate change now", Community::A, 60);
        push("climate change now", Community::B, 10);
        push("only here", Community::A, 40);
        push("shared words", Community::A, 100);
        push("shared words", Community::B, 100);
        push("other stuff", Community::B, 90);
        let corpus = Corpus::from_documents(PerCommunity::new("x".into(), "y".into()), docs);
        let lex = SentimentLexicon::from_rows(Vec::<(String, f64)>::new()).unwrap().0;
        InvertedIndex::build(corpus, 3, &lex).unwrap()
    }

    #[test]
    fn candidates_need_both_communities() {
        let config = CurationConfig { min_docs: 5, ..Default::default() };
        let terms: Vec<String> = candidates(&small_index(), &config).unwrap().into_iter().map(|s| s.term).collect();
        assert!(!terms.iter().any(|t| t.contains("only")));
        assert!(terms.contains(&"climate change".to_string()));
    }

    #[test]
    fn subsumption_keeps_longest_dominant_term() {
        let config = CurationConfig { min_docs: 5, ..Default::default() };
        let curated = curate(&small_index(), &config).unwrap();
        let terms: Vec<&str> = curated.iter().map(|t| t.term.as_str()).collect();
        assert_eq!(terms, vec!["climate change now"]);

        let unfiltered = CurationConfig { subsumption_filter: false, ..config };
        let curated = curate(&small_index(), &unfiltered).unwrap();
        assert_eq!(curated.len(), 6);
        assert!(curated.windows(2).all(|w| w[0].rank_key >= w[1].rank_key));
    }

    #[test]
    fn max_terms_and_depth() {
        let config =
            CurationConfig { min_docs: 5, subsumption_filter: false, max_terms: Some(2), ..Default::default() };
        assert_eq!(curate(&small_index(), &config).unwrap().len(), 2);
        let deep = CurationConfig { n_max: 4, ..Default::default() };
        assert!(matches!(curate(&small_index(), &deep), Err(CurationError::IndexTooShallow { .. })));
    }

    #[test]
    fn curated_file_round_trip() {
        let config = CurationConfig { min_docs: 5, ..Default::default() };
        let curated = curate(&small_index(), &config).unwrap();
        let mut buf = Vec::new();
        write_curated(&mut buf, &curated).unwrap();
        assert_eq!(read_curated(&buf[..]).unwrap(), curated);
        assert!(matches!(read_curated("{nope\n".as_bytes()), Err(CurationError::Parse { line: 1, .. })));
    }
}
