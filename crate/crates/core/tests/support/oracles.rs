//! Brute-force reference implementations used by the property and acceptance
//! tests. Nothing here calls into the index, curation, or scatter code paths
//! it is compared against.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use bd_core::corpus::{is_sentinel, Community, Corpus};
use bd_core::sentiment::SentimentLexicon;

fn contains_run(tokens: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty() && tokens.windows(phrase.len()).any(|w| w == phrase)
}

/// Per-community matching-document counts and sentiment sums, by linear scan.
pub fn scan_term(corpus: &Corpus, lexicon: &SentimentLexicon, phrase: &[String]) -> ([u64; 2], [f64; 2]) {
    let mut counts = [0u64; 2];
    let mut sums = [0.0f64; 2];
    for doc in corpus.documents() {
        if contains_run(&doc.tokens, phrase) {
            let slot = doc.community.index();
            counts[slot] += 1;
            sums[slot] += lexicon.score(&doc.tokens).value();
        }
    }
    (counts, sums)
}

pub fn z_score(y1: f64, n1: f64, y2: f64, n2: f64, a: f64) -> f64 {
    let l1 = (y1 + a).ln() - (n1 - y1 + a).ln();
    let l2 = (y2 + a).ln() - (n2 - y2 + a).ln();
    (l1 - l2) / (1.0 / (y1 + a) + 1.0 / (y2 + a)).sqrt()
}

pub struct Thresholds {
    pub min_rate_per_k: f64,
    pub min_docs: u64,
    pub freq_z: f64,
    pub sent_gap: f64,
    pub sent_min_docs: u64,
    pub alpha: f64,
    pub n_max: usize,
    pub subsumption: bool,
}

/// Selected term set, recomputed from the documents alone.
pub fn curate_by_scan(corpus: &Corpus, lexicon: &SentimentLexicon, t: &Thresholds) -> BTreeMap<String, f64> {
    let mut docs_with: BTreeMap<Vec<String>, BTreeSet<usize>> = BTreeMap::new();
    for (i, doc) in corpus.documents().iter().enumerate() {
        for n in 1..=t.n_max {
            for w in doc.tokens.windows(n) {
                if n > 1 && w.iter().any(|x| is_sentinel(x)) {
                    continue;
                }
                docs_with.entry(w.to_vec()).or_default().insert(i);
            }
        }
    }
    let totals = [corpus.counts()[Community::A] as f64, corpus.counts()[Community::B] as f64];
    let scores: Vec<f64> = corpus.documents().iter().map(|d| lexicon.score(&d.tokens).value()).collect();
    let mut selected: BTreeMap<Vec<String>, f64> = BTreeMap::new();
    for (gram, docs) in &docs_with {
        if gram.iter().any(|x| is_sentinel(x)) {
            continue;
        }
        let mut count = [0u64; 2];
        let mut sum = [0.0; 2];
        for &d in docs {
            let slot = corpus.documents()[d].community.index();
            count[slot] += 1;
            sum[slot] += scores[d];
        }
        let ok = (0..2).all(|s| count[s] >= t.min_docs && 1000.0 * count[s] as f64 / totals[s] >= t.min_rate_per_k);
        if !ok {
            continue;
        }
        let z = z_score(count[0] as f64, totals[0], count[1] as f64, totals[1], t.alpha);
        let gap = (count[0] >= t.sent_min_docs && count[1] >= t.sent_min_docs)
            .then(|| (sum[0] / count[0] as f64 - sum[1] / count[1] as f64).abs());
        if z.abs() >= t.freq_z || gap.is_some_and(|g| g >= t.sent_gap) {
            selected.insert(gram.clone(), z);
        }
    }
    let keep: Vec<String> = selected
        .iter()
        .filter(|(gram, z)| {
            !t.subsumption
                || !selected.iter().any(|(other, oz)| {
                    other.len() > gram.len()
                        && other.windows(gram.len()).any(|w| w == gram.as_slice())
                        && oz.abs() >= z.abs()
                })
        })
        .map(|(g, _)| g.join(" "))
        .collect();
    selected.into_iter().map(|(g, z)| (g.join(" "), z)).filter(|(g, _)| keep.contains(g)).collect()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
pub fn jacobi_eigenvalues(matrix: &[Vec<f64>]) -> Vec<f64> {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut values: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    values.sort_by(|x, y| y.total_cmp(x));
    values
}

/// Sample covariance (divisor n - 1) of row vectors.
pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let means: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| rows.iter().map(|r| (r[i] - means[i]) * (r[j] - means[j])).sum::<f64>() / (n - 1.0))
                .collect()
        })
        .collect()
}

/// DBSCAN by neighborhood graph + union-find over core points. A border point
/// takes the component whose lowest-indexed core point comes first.
pub fn dbscan_by_components(points: &[[f64; 2]], eps: f64, min_pts: usize) -> Vec<i32> {
    let n = points.len();
    let near = |i: usize, j: usize| {
        let dx = points[i][0] - points[j][0];
        let dy = points[i][1] - points[j][1];
        dx * dx + dy * dy <= eps * eps
    };
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in 0..n {
            if core[i] && core[j] && near(i, j) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                // Root at the smaller index so a root is its component's first core point.
                let (lo, hi) = if ri < rj { (ri, rj) } else { (rj, ri) };
                parent[hi] = lo;
            }
        }
    }
    let mut raw = vec![-1i64; n];
    for i in 0..n {
        if core[i] {
            raw[i] = find(&mut parent, i) as i64;
        }
    }
    for i in 0..n {
        if !core[i] {
            raw[i] = (0..n).filter(|&j| core[j] && near(i, j)).map(|j| find(&mut parent, j) as i64).min().unwrap_or(-1);
        }
    }
    let mut ids: BTreeMap<i64, i32> = BTreeMap::new();
    raw.iter()
        .map(|&r| {
            if r < 0 {
                -1
            } else {
                let next = ids.len() as i32;
                *ids.entry(r).or_insert(next)
            }
        })
        .collect()
}

/// Same partition and same noise set, up to renaming cluster ids.
pub fn same_partition(a: &[i32], b: &[i32]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut ab: BTreeMap<i32, i32> = BTreeMap::new();
    let mut ba: BTreeMap<i32, i32> = BTreeMap::new();
    a.iter().zip(b).all(|(&x, &y)| {
        if (x == -1) != (y == -1) {
            return false;
        }
        *ab.entry(x).or_insert(y) == y && *ba.entry(y).or_insert(x) == x
    })
}
