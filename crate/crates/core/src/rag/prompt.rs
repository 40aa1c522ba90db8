//! Prompt templates and community-blind prompt rendering.

use std::borrow::Cow;
use std::collections::BTreeSet;

use regex::{Regex, RegexBuilder};
use thiserror::Error;

use super::{GenerationKind, GenerationRequest};

/// Each sample text is cut to this many characters.
pub const SAMPLE_CHAR_LIMIT: usize = 500;
pub const DEFAULT_PROMPT_BUDGET: usize = 48_000;
const HEADER_PREFIX: &str = "bd-templates ";
const PLACEHOLDERS: [&str; 4] = ["term", "samples", "group1", "group2"];
/// Replacement for community identifiers found in sample texts.
pub const REDACTION: &str = "[group]";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template file must start with a `bd-templates <version>` line")]
    MissingHeader,
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: text outside of any section")]
    OutsideSection { line: usize },
    #[error("section [{0}] is missing")]
    MissingSection(String),
    #[error("section [{0}] appears twice")]
    DuplicateSection(String),
    #[error("section [{section}]: unknown placeholder {{{name}}}")]
    UnknownPlaceholder { section: String, name: String },
    #[error("section [{section}]: placeholder {{{name}}} is not allowed here")]
    MisplacedPlaceholder { section: String, name: String },
    #[error("section [{section}]: required placeholder {{{name}}} is missing")]
    MissingPlaceholder { section: String, name: String },
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("insufficient data for generation")]
    InsufficientData,
    #[error("{kind} expects {expected} sample group(s), got {got}")]
    WrongGroupCount { kind: GenerationKind, expected: usize, got: usize },
    #[error("prompt budget of {budget} characters cannot fit the instruction and one sample per group")]
    BudgetTooSmall { budget: usize },
    #[error("rendered prompt names a community ({0:?})")]
    Leak(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot(&'static str),
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Template {
    segments: Vec<Segment>,
}

impl Template {
    fn parse(section: &str, body: &str) -> Result<Template, TemplateError> {
        let mut segments = Vec::new();
        let mut text = String::new();
        let mut rest = body;
        while let Some(open) = rest.find('{') {
            text.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let name_len = after.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(after.len());
            if name_len > 0 && after[name_len..].starts_with('}') {
                let name = &after[..name_len];
                let slot = PLACEHOLDERS.iter().find(|p| **p == name).ok_or_else(|| {
                    TemplateError::UnknownPlaceholder { section: section.to_string(), name: name.to_string() }
                })?;
                if !text.is_empty() {
                    segments.push(Segment::Text(std::mem::take(&mut text)));
                }
                segments.push(Segment::Slot(slot));
                rest = &after[name_len + 1..];
            } else {
                text.push('{');
                rest = after;
            }
        }
        text.push_str(rest);
        if !text.is_empty() {
            segments.push(Segment::Text(text));
        }
        Ok(Template { segments })
    }

    fn slots(&self) -> BTreeSet<&'static str> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Slot(name) => Some(*name),
                Segment::Text(_) => None,
            })
            .collect()
    }

    fn render(&self, term: &str, groups: &[String]) -> String {
        let mut out = String::new();
        for segment in &self.segments {
            match segment {
                Segment::Text(t) => out.push_str(t),
                Segment::Slot("term") => out.push_str(term),
                Segment::Slot("samples") | Segment::Slot("group1") => out.push_str(&groups[0]),
                Segment::Slot("group2") => out.push_str(&groups[1]),
                Segment::Slot(_) => {}
            }
        }
        out
    }
}

/// The three prompt templates plus their version tag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateSet {
    version: String,
    templates: [Template; 3],
}

fn kind_slot(kind: GenerationKind) -> usize {
    match kind {
        GenerationKind::Summary => 0,
        GenerationKind::Definition => 1,
        GenerationKind::Alternatives => 2,
    }
}

impl TemplateSet {
    /// The templates bundled with the crate.
    pub fn builtin() -> TemplateSet {
        TemplateSet::parse(include_str!("../../data/templates.txt")).expect("bundled templates are valid")
    }

    pub fn parse(source: &str) -> Result<TemplateSet, TemplateError> {
        let mut lines = source.lines().enumerate().peekable();
        let mut version = None;
        for (_, line) in lines.by_ref() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            version = trimmed.strip_prefix(HEADER_PREFIX).map(|v| v.trim().to_string()).filter(|v| !v.is_empty());
            break;
        }
        let version = version.ok_or(TemplateError::MissingHeader)?;

        let mut bodies: [Option<Vec<&str>>; 3] = [None, None, None];
        let mut current: Option<usize> = None;
        for (i, line) in lines {
            let trimmed = line.trim();
            if let Some(name) = trimmed.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
                let kind: GenerationKind =
                    name.parse().map_err(|_| TemplateError::UnknownSection { line: i + 1, name: name.to_string() })?;
                let slot = kind_slot(kind);
                if bodies[slot].is_some() {
                    return Err(TemplateError::DuplicateSection(name.to_string()));
                }
                bodies[slot] = Some(Vec::new());
                current = Some(slot);
                continue;
            }
            match current {
                Some(slot) => bodies[slot].as_mut().unwrap().push(line),
                None if trimmed.is_empty() || trimmed.starts_with('#') => {}
                None => return Err(TemplateError::OutsideSection { line: i + 1 }),
            }
        }

        let mut templates = Vec::with_capacity(3);
        for kind in GenerationKind::ALL {
            let section = kind.as_str();
            let body = bodies[kind_slot(kind)].take().ok_or_else(|| TemplateError::MissingSection(section.into()))?;
            let body = body.join("\n");
            let template = Template::parse(section, body.trim_matches('\n'))?;
            let (required, forbidden): (&[&str], &[&str]) = match kind {
                GenerationKind::Alternatives => (&["group1", "group2"], &["samples"]),
                _ => (&["samples"], &["group1", "group2"]),
            };
            let slots = template.slots();
            if let Some(name) = required.iter().find(|n| !slots.contains(*n)) {
                return Err(TemplateError::MissingPlaceholder { section: section.into(), name: name.to_string() });
            }
            if let Some(name) = forbidden.iter().find(|n| slots.contains(*n)) {
                return Err(TemplateError::MisplacedPlaceholder { section: section.into(), name: name.to_string() });
            }
            templates.push(template);
        }
        let templates: [Template; 3] = templates.try_into().unwrap();
        Ok(TemplateSet { version, templates })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    fn get(&self, kind: GenerationKind) -> &Template {
        &self.templates[kind_slot(kind)]
    }
}

/// Keeps community identifiers (labels, display names) out of prompts.
#[derive(Clone, Debug)]
pub struct BlindnessGuard {
    pattern: Option<Regex>,
}

impl BlindnessGuard {
    /// Identifiers match case-insensitively as whole words, with an optional plural "s".
    pub fn new<I, S>(identifiers: I) -> BlindnessGuard
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut names: Vec<String> =
            identifiers.into_iter().map(|s| s.as_ref().trim().to_string()).filter(|s| !s.is_empty()).collect();
        names.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        names.dedup();
        if names.is_empty() {
            return BlindnessGuard { pattern: None };
        }
        let alternatives: Vec<String> = names.iter().map(|n| regex::escape(n)).collect();
        let pattern = RegexBuilder::new(&format!(r"\b(?:{})s?\b", alternatives.join("|")))
            .case_insensitive(true)
            .build()
            .expect("escaped identifiers form a valid pattern");
        BlindnessGuard { pattern: Some(pattern) }
    }

    /// First identifier occurrence in `text`, if any.
    pub fn find(&self, text: &str) -> Option<String> {
        self.pattern.as_ref()?.find(text).map(|m| m.as_str().to_string())
    }

    pub fn redact<'a>(&self, text: &'a str) -> Cow<'a, str> {
        match &self.pattern {
            Some(p) => p.replace_all(text, REDACTION),
            None => Cow::Borrowed(text),
        }
    }
}

/// A rendered prompt and the doc ids (per group) that made it in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub text: String,
    pub used: Vec<Vec<String>>,
}

impl RenderedPrompt {
    pub fn provenance(&self) -> Vec<String> {
        self.used.iter().flatten().cloned().collect()
    }
}

fn sample_line(number: usize, text: &str, guard: &BlindnessGuard) -> String {
    let flat = text.split_whitespace().collect::<Vec<_>>().join(" ");
    let redacted = guard.redact(&flat);
    let clipped: String = redacted.chars().take(SAMPLE_CHAR_LIMIT).collect();
    format!("{number}. {clipped}")
}

/// Renders the request's template with numbered sample texts.
///
/// Samples are clipped to [`SAMPLE_CHAR_LIMIT`] characters and community
/// identifiers in them are redacted. When the prompt exceeds `budget`
/// characters, trailing samples are dropped (from the larger group first).
pub fn build_prompt(
    request: &GenerationRequest,
    templates: &TemplateSet,
    guard: &BlindnessGuard,
    budget: usize,
) -> Result<RenderedPrompt, PromptError> {
    let expected = request.kind.groups();
    if request.samples.len() != expected {
        return Err(PromptError::WrongGroupCount { kind: request.kind, expected, got: request.samples.len() });
    }
    if request.samples.iter().any(|s| s.is_empty()) {
        return Err(PromptError::InsufficientData);
    }
    let lines: Vec<Vec<String>> = request
        .samples
        .iter()
        .map(|set| set.texts.iter().enumerate().map(|(i, t)| sample_line(i + 1, t, guard)).collect())
        .collect();
    let template = templates.get(request.kind);
    let term = guard.redact(&request.term);
    let render = |counts: &[usize]| {
        let groups: Vec<String> = lines.iter().zip(counts).map(|(l, &n)| l[..n].join("\n")).collect();
        let groups = if groups.len() == 1 { vec![groups[0].clone(), String::new()] } else { groups };
        template.render(&term, &groups)
    };

    let mut counts: Vec<usize> = lines.iter().map(Vec::len).collect();
    let mut text = render(&counts);
    while text.chars().count() > budget {
        let widest = (0..counts.len()).rev().max_by_key(|&g| counts[g]).unwrap();
        if counts[widest] <= 1 {
            return Err(PromptError::BudgetTooSmall { budget });
        }
        counts[widest] -= 1;
        text = render(&counts);
    }
    if let Some(found) = guard.find(&text) {
        return Err(PromptError::Leak(found));
    }
    let used = request.samples.iter().zip(&counts).map(|(s, &n)| s.doc_ids[..n].to_vec()).collect();
    Ok(RenderedPrompt { text, used })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Community;
    use crate::rag::SampleSet;

    fn set(community: Community, texts: &[&str]) -> SampleSet {
        SampleSet {
            term: "climate change".into(),
            community,
            seed: 1,
            cap: 50,
            doc_ids: (0..texts.len()).map(|i| format!("{}{i}", community.position())).collect(),
            texts: texts.iter().map(|t| t.to_string()).collect(),
            matches: texts.len(),
        }
    }

    fn guard() -> BlindnessGuard {
        BlindnessGuard::new(["rep", "dem", "Republican", "Democrat"])
    }

    #[test]
    fn builtin_templates_parse() {
        let t = TemplateSet::builtin();
        assert!(!t.version().is_empty());
    }

    #[test]
    fn summary_prompt_numbers_samples_and_stays_blind() {
        let request = GenerationRequest::single(
            GenerationKind::Summary,
            set(Community::A, &["climate change is real", "Democrats on climate change"]),
            "m",
            1,
        );
        let p = build_prompt(&request, &TemplateSet::builtin(), &guard(), DEFAULT_PROMPT_BUDGET).unwrap();
        assert!(p.text.contains("1. climate change is real"));
        assert!(p.text.contains("2. [group] on climate change"));
        assert!(guard().find(&p.text).is_none());
        assert_eq!(p.provenance(), vec!["10", "11"]);
        let again = build_prompt(&request, &TemplateSet::builtin(), &guard(), DEFAULT_PROMPT_BUDGET).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn alternatives_use_blind_groups() {
        let request = GenerationRequest::alternatives(set(Community::A, &["one"]), set(Community::B, &["two"]), "m", 1);
        let p = build_prompt(&request, &TemplateSet::builtin(), &guard(), DEFAULT_PROMPT_BUDGET).unwrap();
        assert!(p.text.contains("Group 1"));
        assert!(p.text.contains("Group 2"));
        assert!(p.text.find("1. one").unwrap() < p.text.find("1. two").unwrap());
    }

    #[test]
    fn empty_samples_refused() {
        let request = GenerationRequest::single(GenerationKind::Definition, set(Community::A, &[]), "m", 1);
        let err = build_prompt(&request, &TemplateSet::builtin(), &guard(), DEFAULT_PROMPT_BUDGET).unwrap_err();
        assert_eq!(err, PromptError::InsufficientData);
        assert_eq!(err.to_string(), "insufficient data for generation");
        let request = GenerationRequest::alternatives(set(Community::A, &["x"]), set(Community::B, &[]), "m", 1);
        assert!(build_prompt(&request, &TemplateSet::builtin(), &guard(), DEFAULT_PROMPT_BUDGET).is_err());
    }

    #[test]
    fn long_samples_are_clipped_and_budget_drops_trailing() {
        let long = "x".repeat(800);
        let texts: Vec<&str> = vec![&long; 10];
        let request = GenerationRequest::single(GenerationKind::Summary, set(Community::A, &texts), "m", 1);
        let templates = TemplateSet::builtin();
        let full = build_prompt(&request, &templates, &guard(), DEFAULT_PROMPT_BUDGET).unwrap();
        assert!(!full.text.contains(&"x".repeat(SAMPLE_CHAR_LIMIT + 1)));
        assert!(full.text.contains(&"x".repeat(SAMPLE_CHAR_LIMIT)));

        let budget = full.text.chars().count() - 1;
        let trimmed = build_prompt(&request, &templates, &guard(), budget).unwrap();
        assert_eq!(trimmed.used[0].len(), 9);
        assert!(trimmed.text.chars().count() <= budget);
        assert!(trimmed.text.contains("\n9. x") && !trimmed.text.contains("\n10. x"));

        assert_eq!(
            build_prompt(&request, &templates, &guard(), 100).unwrap_err(),
            PromptError::BudgetTooSmall { budget: 100 }
        );
    }

    #[test]
    fn leaking_template_is_caught() {
        let templates = TemplateSet::parse(
            "bd-templates t\n[summary]\nRepublican posts:\n{samples}\n[definition]\n{samples}\n[alternatives]\n{group1}\n{group2}\n",
        )
        .unwrap();
        let request = GenerationRequest::single(GenerationKind::Summary, set(Community::A, &["a"]), "m", 1);
        assert!(matches!(build_prompt(&request, &templates, &guard(), 1000), Err(PromptError::Leak(_))));
    }

    #[test]
    fn guard_matches_whole_words_only() {
        let g = guard();
        assert_eq!(g.find("the Reps voted").as_deref(), Some("Reps"));
        assert!(g.find("a report on democracy").is_none());
        assert_eq!(g.redact("DEMOCRATS and republicans"), "[group] and [group]");
        assert!(BlindnessGuard::new([""]).find("anything").is_none());
    }

    #[test]
    fn template_errors() {
        assert_eq!(TemplateSet::parse("[summary]\n{samples}"), Err(TemplateError::MissingHeader));
        let base = |summary: &str| {
            format!("bd-templates 2\n[summary]\n{summary}\n[definition]\n{{samples}}\n[alternatives]\n{{group1}} {{group2}}\n")
        };
        assert!(TemplateSet::parse(&base("{samples} {term}")).is_ok());
        assert!(TemplateSet::parse(&base("{samples} {x} literal { brace }")).is_err());
        assert!(TemplateSet::parse(&base("literal { brace } {samples}")).is_ok());
        assert_eq!(
            TemplateSet::parse(&base("{term}")),
            Err(TemplateError::MissingPlaceholder { section: "summary".into(), name: "samples".into() })
        );
        assert_eq!(
            TemplateSet::parse(&base("{samples}{group2}")),
            Err(TemplateError::MisplacedPlaceholder { section: "summary".into(), name: "group2".into() })
        );
        assert!(matches!(
            TemplateSet::parse("bd-templates 1\n[poem]\n"),
            Err(TemplateError::UnknownSection { line: 2, .. })
        ));
        assert_eq!(
            TemplateSet::parse("bd-templates 1\n[summary]\n{samples}\n"),
            Err(TemplateError::MissingSection("definition".into()))
        );
    }
}
