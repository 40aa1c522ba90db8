//! Writes the synthetic two-community fixture corpus.
//!
//!     cargo run -p bd-core --example gen_fixture -- fixtures/corpus.jsonl
//!
//! Every document exists in a "rep" and a "dem" version that share all text
//! except for a few planted contrasts, so background vocabulary is exactly
//! balanced between the communities:
//!
//! - "illegal aliens" (150 vs 30 docs) and "undocumented workers" (30 vs 150)
//! - "gun control" (200 vs 200) used with positive words by one side and
//!   negative words by the other
//! - "budget vote" (24 vs 23), "zephyr" (3 vs 0), "town hall" (200 vs 200)
//! - "this week" in 20 tax and 20 weather posts per side, for the scatterplot

use std::fs::File;
use std::io::{BufWriter, Write};

use bd_core::corpus::{is_stopword, normalize, tokenize};
use bd_core::sentiment::SentimentLexicon;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_611;
const DOCS_PER_SIDE: usize = 2000;

const BACKGROUND: [&str; 50] = [
    "city", "council", "report", "school", "road", "market", "river", "county", "office", "bridge", "station",
    "project", "district", "library", "meeting", "street", "park", "program", "water", "state", "local", "board",
    "building", "center", "family", "morning", "evening", "summer", "winter", "people", "farm", "train", "bus",
    "north", "south", "east", "west", "data", "letter", "phone", "paper", "table", "window", "garden", "kitchen",
    "corner", "member", "ticket", "line", "area",
];
const BEFORE: [&str; 12] = [
    "about",
    "regarding",
    "more",
    "many",
    "new",
    "those",
    "fewer",
    "counting",
    "housing",
    "hiring",
    "listing",
    "tracking",
];
const AFTER: [&str; 12] = [
    "today",
    "again",
    "here",
    "lately",
    "downtown",
    "everywhere",
    "nationwide",
    "statewide",
    "tonight",
    "yesterday",
    "recently",
    "locally",
];
const VERBS: [&str; 12] =
    ["seems", "looks", "sounds", "feels", "remains", "stays", "became", "appears", "proves", "turns", "gets", "keeps"];
const SUBJECTS: [&str; 12] = [
    "gun show",
    "gun shop",
    "gun range",
    "gun club",
    "gun museum",
    "gun auction",
    "gun magazine",
    "gun store",
    "gun expo",
    "gun collection",
    "gun catalog",
    "gun permit",
];
const TONES: [(&str, &str); 6] = [
    ("great", "terrible"),
    ("good", "bad"),
    ("wonderful", "awful"),
    ("excellent", "horrible"),
    ("lovely", "disgusting"),
    ("amazing", "sad"),
];
const TAX: &str = "This week Congress debated the tax bill and new income tax rates";
const WEATHER: &str = "this week heavy rain and gusty wind hit the coast with storm alerts";

/// A document that differs between the two sides only where noted.
struct Template {
    rep: String,
    dem: String,
    /// Hashtags would add words; scatter documents keep a fixed vocabulary.
    hashtags: bool,
}

impl Template {
    fn new(rep: String, dem: String) -> Template {
        Template { rep, dem, hashtags: true }
    }

    fn same(text: String) -> Template {
        Template::new(text.clone(), text)
    }
}

fn words(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> String {
    let n = rng.random_range(lo..=hi);
    (0..n).map(|_| *BACKGROUND.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// Tweet-like noise applied identically to both versions.
fn decorate(rng: &mut ChaCha8Rng, hashtags: bool) -> (String, String) {
    let mut prefix = String::new();
    let mut suffix = String::new();
    if rng.random_bool(0.08) {
        prefix = format!("@user{} ", rng.random_range(1..400));
    }
    if rng.random_bool(0.08) {
        suffix = format!(" https://t.co/{:08x}", rng.random::<u32>());
    }
    if rng.random_bool(0.05) && hashtags {
        suffix.push_str(&format!(" #{}", BACKGROUND.choose(rng).unwrap()));
    }
    (prefix, suffix)
}

fn templates(rng: &mut ChaCha8Rng) -> Vec<Template> {
    let mut out = Vec::with_capacity(DOCS_PER_SIDE);

    // Immigration: 150 templates lean one way, 30 the other.
    for i in 0..180 {
        let (lead, tail) = (words(rng, 1, 4), words(rng, 0, 3));
        let (before, after) = (BEFORE.choose(rng).unwrap(), AFTER.choose(rng).unwrap());
        let (r, d) = if i < 150 {
            ("illegal aliens", "undocumented workers")
        } else {
            ("undocumented workers", "illegal aliens")
        };
        out.push(Template::new(
            format!("{lead} {before} {r} {after} {tail}"),
            format!("{lead} {before} {d} {after} {tail}"),
        ));
    }

    // Sentiment contrast. Each "gun control" template has a twin about another
    // "gun ..." subject with the tones swapped, which balances every other n-gram.
    for _ in 0..200 {
        let (lead, tail) = (words(rng, 1, 4), words(rng, 0, 3));
        let verb = VERBS.choose(rng).unwrap();
        let (pos, neg) = *TONES.choose(rng).unwrap();
        let subject = SUBJECTS.choose(rng).unwrap();
        out.push(Template::new(
            format!("{lead} gun control {verb} {pos} {tail}"),
            format!("{lead} gun control {verb} {neg} {tail}"),
        ));
        out.push(Template::new(
            format!("{lead} {subject} {verb} {neg} {tail}"),
            format!("{lead} {subject} {verb} {pos} {tail}"),
        ));
    }

    for i in 0..200 {
        let (lead, tail) = (words(rng, 1, 4), words(rng, 1, 4));
        let middle = if i % 7 == 0 { "with republicans and democrats" } else { "meeting" };
        out.push(Template::same(format!("{lead} town hall {middle} {tail}")));
    }

    for i in 0..24 {
        let (lead, tail) = (words(rng, 1, 4), words(rng, 0, 3));
        let dem = if i == 0 { "budget plan" } else { "budget vote" };
        out.push(Template::new(format!("{lead} budget vote {tail}"), format!("{lead} {dem} {tail}")));
    }

    for _ in 0..3 {
        let (lead, tail) = (words(rng, 1, 4), words(rng, 0, 3));
        out.push(Template::new(format!("{lead} zephyr {tail}"), format!("{lead} breeze {tail}")));
    }

    for i in 0..40 {
        let text = if i % 2 == 0 { TAX } else { WEATHER };
        out.push(Template { hashtags: false, ..Template::same(text.to_string()) });
    }

    while out.len() < DOCS_PER_SIDE {
        out.push(Template::same(words(rng, 5, 12)));
    }
    out
}

/// Planted contrasts rely on the filler vocabulary carrying no sentiment
/// ("gun" and "illegal" do, and are balanced by construction).
fn check_vocabulary() {
    let lexicon = SentimentLexicon::bundled();
    let filler = BACKGROUND.iter().chain(&BEFORE).chain(&AFTER).chain(&VERBS).chain(&SUBJECTS);
    let extra = ["control", "town", "hall", "budget", "vote", "plan", "zephyr", "breeze", "aliens"];
    for phrase in filler.chain(&extra).chain(&["undocumented", "workers", "republicans", "democrats"]) {
        for token in tokenize(&normalize(phrase)) {
            let neutral = lexicon.valence(&token).is_none() && !lexicon.is_negator(&token);
            assert!(neutral || token == "gun" || is_stopword(&token), "filler word {token:?} carries sentiment");
        }
    }
}

fn main() -> std::io::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "fixtures/corpus.jsonl".to_string());
    check_vocabulary();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut lines = Vec::with_capacity(2 * DOCS_PER_SIDE);
    for (i, t) in templates(&mut rng).into_iter().enumerate() {
        let (prefix, suffix) = decorate(&mut rng, t.hashtags);
        for (label, id, text) in [("rep", format!("r{:04}", i + 1), &t.rep), ("dem", format!("d{:04}", i + 1), &t.dem)]
        {
            let text = format!("{prefix}{}{suffix}", text.split_whitespace().collect::<Vec<_>>().join(" "));
            lines.push(serde_json::json!({ "id": id, "community": label, "text": text }).to_string());
        }
    }
    lines.shuffle(&mut rng);
    let mut out = BufWriter::new(File::create(&path)?);
    for line in lines {
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    eprintln!("wrote {} documents to {path}", 2 * DOCS_PER_SIDE);
    Ok(())
}
