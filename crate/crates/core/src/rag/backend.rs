use std::collections::HashMap;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{is_sentinel, is_stopword, normalize, tokenize};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum BackendError {
    /// Worth retrying (transport errors, timeouts, rate limits, 5xx).
    #[error("transient backend failure: {0}")]
    Transient(String),
    #[error("backend failure: {0}")]
    Fatal(String),
}

impl BackendError {
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Transient(_))
    }
}

/// A text-completion service.
pub trait LlmBackend: Send + Sync {
    fn backend_id(&self) -> &str;

    fn complete(&self, prompt: &str, model_id: &str, seed: u64) -> Result<String, BackendError>;
}

/// Offline backend whose output is a pure function of (prompt, model, seed).
///
/// It lists the most frequent content words of the numbered sample lines in
/// the prompt, leaving out words present in every sample (the term itself).
#[derive(Clone, Copy, Debug, Default)]
pub struct StubBackend;

pub const STUB_BACKEND_ID: &str = "stub-v1";
const STUB_WORDS: usize = 5;

fn sample_lines(prompt: &str) -> Vec<&str> {
    prompt
        .lines()
        .filter_map(|line| {
            let digits = line.find(|c: char| !c.is_ascii_digit())?;
            (digits > 0).then(|| line[digits..].strip_prefix(". ")).flatten()
        })
        .collect()
}

impl LlmBackend for StubBackend {
    fn backend_id(&self) -> &str {
        STUB_BACKEND_ID
    }

    fn complete(&self, prompt: &str, model_id: &str, seed: u64) -> Result<String, BackendError> {
        let mut hasher = Sha256::new();
        hasher.update(model_id.as_bytes());
        hasher.update([0]);
        hasher.update(seed.to_le_bytes());
        hasher.update(prompt.as_bytes());
        let tag = hex::encode(&hasher.finalize()[..4]);

        let samples = sample_lines(prompt);
        if samples.is_empty() {
            return Ok(format!("[stub {tag}] No sample texts found in the prompt."));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        let mut presence: HashMap<String, usize> = HashMap::new();
        for line in &samples {
            let mut tokens = tokenize(&normalize(line));
            tokens.retain(|t| t.chars().count() >= 3 && !is_stopword(t) && !is_sentinel(t));
            for t in &tokens {
                *counts.entry(t.clone()).or_default() += 1;
            }
            tokens.sort();
            tokens.dedup();
            for t in tokens {
                *presence.entry(t).or_default() += 1;
            }
        }
        if samples.len() > 1 {
            counts.retain(|t, _| presence[t] < samples.len());
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let mut out = format!("[stub {tag}] {} texts, model {model_id}, seed {seed}.\nRecurring words:", samples.len());
        if ranked.is_empty() {
            out.push_str("\n- (none)");
        }
        for (word, _) in ranked.into_iter().take(STUB_WORDS) {
            out.push_str("\n- ");
            out.push_str(&word);
        }
        Ok(out)
    }
}
