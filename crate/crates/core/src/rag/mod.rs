//! Grounded generation: sample matching documents per community, render a
//! community-blind prompt, and ask an LLM backend for a summary, a
//! definition, or neutral alternative phrasings.

mod backend;
mod cache;
mod generate;
mod prompt;
mod sample;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Community;

pub use backend::{BackendError, LlmBackend, StubBackend};
pub use cache::{CacheKey, GenerationCache};
pub use generate::{Generated, GenerationError, GenerationSettings, Generator, RetryPolicy};
pub use prompt::{
    build_prompt, BlindnessGuard, PromptError, RenderedPrompt, TemplateError, TemplateSet, DEFAULT_PROMPT_BUDGET,
    REDACTION, SAMPLE_CHAR_LIMIT,
};
pub use sample::{sample_matches, SampleSet};

pub const DEFAULT_SAMPLE_CAP: usize = 50;
pub const DEFAULT_MODEL_ID: &str = "gpt-3.5-turbo";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenerationKind {
    Summary,
    Definition,
    Alternatives,
}

impl GenerationKind {
    pub const ALL: [GenerationKind; 3] =
        [GenerationKind::Summary, GenerationKind::Definition, GenerationKind::Alternatives];

    pub fn as_str(self) -> &'static str {
        match self {
            GenerationKind::Summary => "summary",
            GenerationKind::Definition => "definition",
            GenerationKind::Alternatives => "alternatives",
        }
    }

    /// Number of sample groups the kind consumes.
    pub fn groups(self) -> usize {
        match self {
            GenerationKind::Alternatives => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for GenerationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GenerationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GenerationKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown generation kind {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub kind: GenerationKind,
    pub term: String,
    /// One set for summary/definition, two (slot order) for alternatives.
    pub samples: Vec<SampleSet>,
    pub model_id: String,
    pub seed: u64,
}

impl GenerationRequest {
    pub fn single(kind: GenerationKind, samples: SampleSet, model_id: &str, seed: u64) -> Self {
        GenerationRequest {
            kind,
            term: samples.term.clone(),
            samples: vec![samples],
            model_id: model_id.to_string(),
            seed,
        }
    }

    pub fn alternatives(first: SampleSet, second: SampleSet, model_id: &str, seed: u64) -> Self {
        GenerationRequest {
            kind: GenerationKind::Alternatives,
            term: first.term.clone(),
            samples: vec![first, second],
            model_id: model_id.to_string(),
            seed,
        }
    }

    pub fn communities(&self) -> Vec<Community> {
        self.samples.iter().map(|s| s.community).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub request: GenerationRequest,
    /// Exact prompt sent to the backend.
    pub prompt: String,
    pub output: String,
    /// Output was cut at the length budget.
    pub truncated: bool,
    /// Document ids that appear in the prompt.
    pub provenance: Vec<String>,
    pub backend_id: String,
    pub template_version: String,
    pub attempt_count: u32,
    pub created_at: String,
}

/// Splits an alternatives answer into items: bullet or numbered lines when
/// present, otherwise non-empty lines.
pub fn parse_alternatives(output: &str) -> Vec<String> {
    let lines: Vec<&str> = output.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let bullets: Vec<String> = lines
        .iter()
        .filter_map(|l| {
            let rest = l.strip_prefix("- ").or_else(|| l.strip_prefix("* ")).or_else(|| {
                let digits = l.find(|c: char| !c.is_ascii_digit())?;
                (digits > 0).then(|| l[digits..].strip_prefix(". ")).flatten()
            })?;
            let rest = rest.trim();
            (!rest.is_empty()).then(|| rest.to_string())
        })
        .collect();
    if bullets.is_empty() {
        lines.into_iter().map(String::from).collect()
    } else {
        bullets
    }
}
