use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Community;
use crate::index::{IndexError, InvertedIndex};

/// Documents sampled for one (term, community, seed, cap).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSet {
    pub term: String,
    pub community: Community,
    pub seed: u64,
    pub cap: usize,
    /// Ascending by doc id.
    pub doc_ids: Vec<String>,
    /// Raw texts, aligned with `doc_ids`.
    pub texts: Vec<String>,
    /// Total matches the sample was drawn from.
    pub matches: usize,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }
}

fn rng_for(term: &str, community: Community, seed: u64) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([community.position()]);
    hasher.update(term.as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

/// Uniform sample without replacement of up to `cap` documents of
/// `community` that contain `term`.
///
/// The draw depends only on (term, community, seed, cap) and the index; with
/// `cap >= matches` the whole posting list is returned.
pub fn sample_matches(
    index: &InvertedIndex,
    term: &str,
    community: Community,
    cap: usize,
    seed: u64,
) -> Result<SampleSet, IndexError> {
    if cap < 1 {
        return Err(IndexError::InvalidSampleCap);
    }
    let tokens = InvertedIndex::query_tokens(term)?;
    let surface = tokens.join(" ");
    let docs = index.matching_docs(&tokens);
    let posting = &docs[community];

    let chosen: Vec<u32> = if posting.len() <= cap {
        posting.to_vec()
    } else {
        let mut rng = rng_for(&surface, community, seed);
        rand::seq::index::sample(&mut rng, posting.len(), cap).into_iter().map(|i| posting[i]).collect()
    };

    let corpus = index.corpus();
    let mut picked: Vec<(&str, &str)> = chosen
        .into_iter()
        .map(|o| {
            let doc = corpus.get(o);
            (doc.doc_id.as_str(), doc.text.as_str())
        })
        .collect();
    picked.sort_unstable_by(|a, b| a.0.cmp(b.0));

    Ok(SampleSet {
        term: surface,
        community,
        seed,
        cap,
        doc_ids: picked.iter().map(|p| p.0.to_string()).collect(),
        texts: picked.iter().map(|p| p.1.to_string()).collect(),
        matches: posting.len(),
    })
}
