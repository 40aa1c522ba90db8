//! Engine for a two-community "bridging dictionary".
//!
//! Given a corpus of documents labeled with one of two communities, the
//! engine builds an n-gram inverted index, reports per-term usage and
//! sentiment statistics, curates terms whose usage diverges between the
//! communities, samples matching documents for grounded (community-blind)
//! LLM generation, lays out sampled documents as a 2D topic scatterplot,
//! and renders a printable dictionary.

pub mod clock;
pub mod corpus;
pub mod curation;
pub mod edition;
pub mod index;
pub mod rag;
pub mod scatter;
pub mod sentiment;
pub mod snapshot;

pub use corpus::{Community, Corpus, Document, PerCommunity};
pub use index::{InvertedIndex, TermStats};
