//! Lexicon-based document sentiment with a short negation window.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A negator flips the valence of hits within this many following tokens.
pub const NEGATION_WINDOW: usize = 2;

const NEGATORS_HEADER: &str = "[negators]";

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SentimentScore(f64);

impl SentimentScore {
    pub const NEUTRAL: SentimentScore = SentimentScore(0.0);

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: valence {valence} for {token:?} is outside [-1, 1]")]
    OutOfRange { line: usize, token: String, valence: f64 },
    #[error("line {line}: expected `token<TAB>valence`, got {content:?}")]
    Malformed { line: usize, content: String },
    #[error("read error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexiconWarning {
    pub line: usize,
    pub message: String,
}

/// Token valences in [-1, 1] plus a set of negation tokens.
#[derive(Clone, Debug, Default)]
pub struct SentimentLexicon {
    entries: HashMap<String, f64>,
    negators: HashSet<String>,
}

/// Raw text of the bundled lexicon (VADER word list rescaled to [-1, 1]).
pub const BUNDLED_LEXICON: &str = include_str!("../data/lexicon.tsv");

impl SentimentLexicon {
    pub fn bundled() -> SentimentLexicon {
        SentimentLexicon::load(BUNDLED_LEXICON.as_bytes()).expect("bundled lexicon is valid").0
    }

    /// Builds a lexicon from `(token, valence)` rows. Later duplicates win and
    /// produce a warning.
    pub fn from_rows<I, S>(rows: I) -> Result<(Self, Vec<LexiconWarning>), LexiconError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut lexicon = SentimentLexicon::default();
        let mut warnings = Vec::new();
        for (i, (token, valence)) in rows.into_iter().enumerate() {
            lexicon.insert(i + 1, token.into(), valence, &mut warnings)?;
        }
        Ok((lexicon, warnings))
    }

    /// Parses the tab-separated lexicon format.
    ///
    /// `#` lines are comments; rows after a `[negators]` line are negation
    /// tokens, one per line.
    pub fn load<R: BufRead>(reader: R) -> Result<(Self, Vec<LexiconWarning>), LexiconError> {
        let mut lexicon = SentimentLexicon::default();
        let mut warnings = Vec::new();
        let mut in_negators = false;
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if trimmed.eq_ignore_ascii_case(NEGATORS_HEADER) {
                in_negators = true;
                continue;
            }
            if in_negators {
                lexicon.negators.insert(trimmed.to_lowercase());
                continue;
            }
            let mut fields = trimmed.split('\t');
            let (Some(token), Some(valence), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(LexiconError::Malformed { line: line_no, content: line.clone() });
            };
            let valence: f64 =
                valence.trim().parse().map_err(|_| LexiconError::Malformed { line: line_no, content: line.clone() })?;
            lexicon.insert(line_no, token.trim().to_lowercase(), valence, &mut warnings)?;
        }
        Ok((lexicon, warnings))
    }

    fn insert(
        &mut self,
        line: usize,
        token: String,
        valence: f64,
        warnings: &mut Vec<LexiconWarning>,
    ) -> Result<(), LexiconError> {
        if !(-1.0..=1.0).contains(&valence) {
            return Err(LexiconError::OutOfRange { line, token, valence });
        }
        if let Some(previous) = self.entries.insert(token.clone(), valence) {
            warnings.push(LexiconWarning {
                line,
                message: format!("duplicate entry {token:?}: {previous} replaced by {valence}"),
            });
        }
        Ok(())
    }

    pub fn with_negators<I: IntoIterator<Item = S>, S: Into<String>>(mut self, negators: I) -> Self {
        self.negators.extend(negators.into_iter().map(Into::into));
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.entries.get(token).copied()
    }

    pub fn is_negator(&self, token: &str) -> bool {
        self.negators.contains(token)
    }

    pub fn score<S: AsRef<str>>(&self, tokens: &[S]) -> SentimentScore {
        score(tokens, self)
    }
}

/// Anything that can score a tokenized document.
pub trait SentimentScorer: Send + Sync {
    fn score_tokens(&self, tokens: &[String]) -> SentimentScore;
}

impl SentimentScorer for SentimentLexicon {
    fn score_tokens(&self, tokens: &[String]) -> SentimentScore {
        score(tokens, self)
    }
}

/// Mean valence of lexicon hits, negated for hits preceded by a negator
/// within [`NEGATION_WINDOW`] tokens. Zero-valence entries are not hits.
pub fn score<S: AsRef<str>>(tokens: &[S], lexicon: &SentimentLexicon) -> SentimentScore {
    let mut hits: Vec<f64> = tokens
        .iter()
        .enumerate()
        .filter_map(|(i, token)| {
            let valence = lexicon.valence(token.as_ref())?;
            if valence == 0.0 {
                return None;
            }
            let negated = tokens[i.saturating_sub(NEGATION_WINDOW)..i].iter().any(|t| lexicon.is_negator(t.as_ref()));
            Some(if negated { -valence } else { valence })
        })
        .collect();
    if hits.is_empty() {
        return SentimentScore::NEUTRAL;
    }
    // Order-independent summation.
    hits.sort_by(f64::total_cmp);
    let mean = hits.iter().sum::<f64>() / hits.len() as f64;
    SentimentScore(mean.clamp(-1.0, 1.0))
}
