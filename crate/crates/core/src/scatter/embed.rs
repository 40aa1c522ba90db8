use std::collections::HashMap;
use std::hash::Hasher;

use fnv::FnvHasher;

use super::ScatterError;
use crate::corpus::{is_sentinel, is_stopword, normalize, tokenize};

pub const DEFAULT_DIM: usize = 256;

/// Maps a batch of texts to fixed-dimension vectors, one per text, in order.
pub trait Embedder: Send + Sync {
    /// Identifier recorded in scatter payloads.
    fn id(&self) -> String;

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ScatterError>;
}

/// Feature-hashed tf-idf over unigrams and bigrams with signed buckets.
///
/// Stopwords and placeholder tokens are dropped before bigrams are formed.
/// idf is computed over the batch as `ln((1 + N) / (1 + df)) + 1` and each
/// vector is L2-normalized (an all-stopword text stays the zero vector).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HashedTfidf {
    pub dim: usize,
}

impl Default for HashedTfidf {
    fn default() -> Self {
        HashedTfidf { dim: DEFAULT_DIM }
    }
}

/// Bucket and sign of a feature string (64-bit FNV-1a; the top bit is the sign).
pub fn feature_bucket(feature: &str, dim: usize) -> (usize, f64) {
    let mut h = FnvHasher::default();
    h.write(feature.as_bytes());
    let h = h.finish();
    let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
    ((h % dim as u64) as usize, sign)
}

/// Unigram and bigram features of one text.
pub fn features(text: &str) -> Vec<String> {
    let words: Vec<String> =
        tokenize(&normalize(text)).into_iter().filter(|t| !is_stopword(t) && !is_sentinel(t)).collect();
    let bigrams = words.windows(2).map(|w| format!("{} {}", w[0], w[1]));
    let mut out: Vec<String> = bigrams.collect();
    out.splice(0..0, words);
    out
}

impl Embedder for HashedTfidf {
    fn id(&self) -> String {
        format!("hashed-tfidf-d{}", self.dim)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ScatterError> {
        if texts.is_empty() {
            return Err(ScatterError::EmptyBatch);
        }
        if self.dim == 0 {
            return Err(ScatterError::InvalidParams("embedding dimension must be positive".into()));
        }
        let tf: Vec<HashMap<String, usize>> = texts
            .iter()
            .map(|t| {
                let mut counts = HashMap::new();
                for f in features(t) {
                    *counts.entry(f).or_insert(0) += 1;
                }
                counts
            })
            .collect();
        let mut df: HashMap<&str, usize> = HashMap::new();
        for counts in &tf {
            for f in counts.keys() {
                *df.entry(f.as_str()).or_insert(0) += 1;
            }
        }
        let n = texts.len() as f64;
        let vectors = tf
            .iter()
            .map(|counts| {
                // Fixed feature order keeps the floating-point sums reproducible.
                let mut entries: Vec<(&String, &usize)> = counts.iter().collect();
                entries.sort_unstable();
                let mut v = vec![0.0; self.dim];
                for (f, &count) in entries {
                    let idf = ((1.0 + n) / (1.0 + df[f.as_str()] as f64)).ln() + 1.0;
                    let (bucket, sign) = feature_bucket(f, self.dim);
                    v[bucket] += sign * count as f64 * idf;
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    v.iter_mut().for_each(|x| *x /= norm);
                }
                v
            })
            .collect();
        Ok(vectors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(texts: &[&str]) -> Vec<String> {
        texts.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn features_skip_stopwords() {
        assert_eq!(features("The tax cut is great"), vec!["tax", "cut", "great", "tax cut", "cut great"]);
        assert!(features("the and of").is_empty());
    }

    #[test]
    fn unit_norm_or_zero() {
        let v = HashedTfidf::default().embed(&strings(&["tax cut now", "of the", "rain again today"])).unwrap();
        let norms: Vec<f64> = v.iter().map(|x| x.iter().map(|a| a * a).sum::<f64>().sqrt()).collect();
        assert!((norms[0] - 1.0).abs() < 1e-12);
        assert_eq!(norms[1], 0.0);
        assert!((norms[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_texts_identical_vectors() {
        let v = HashedTfidf::default().embed(&strings(&["storm warning", "storm warning", "budget"])).unwrap();
        assert_eq!(v[0], v[1]);
    }

    #[test]
    fn disjoint_vocabularies_are_orthogonal() {
        let texts = strings(&["budget deficit", "sunny weather"]);
        let buckets =
            |t: &str| -> Vec<usize> { features(t).iter().map(|f| feature_bucket(f, DEFAULT_DIM).0).collect() };
        let (a, b) = (buckets(&texts[0]), buckets(&texts[1]));
        assert!(a.iter().all(|x| !b.contains(x)), "constructed pair collides");
        let v = HashedTfidf::default().embed(&texts).unwrap();
        let dot: f64 = v[0].iter().zip(&v[1]).map(|(x, y)| x * y).sum();
        assert_eq!(dot, 0.0);
    }

    #[test]
    fn empty_batch_is_an_error() {
        assert!(matches!(HashedTfidf::default().embed(&[]), Err(ScatterError::EmptyBatch)));
    }
}
