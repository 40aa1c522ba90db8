//! Topic scatterplot: embed the sampled texts for a term, project them to
//! two dimensions, and group them with density clustering.

mod dbscan;
mod embed;
mod pca;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Community;
use crate::index::{IndexError, InvertedIndex};
use crate::rag::{sample_matches, SampleSet};

pub use dbscan::{dbscan, renumber, ClusterParams, NOISE};
pub use embed::{feature_bucket, features, Embedder, HashedTfidf, DEFAULT_DIM};
pub use pca::{project_2d, Projection};

#[derive(Debug, Error, PartialEq)]
pub enum ScatterError {
    #[error("nothing to embed")]
    EmptyBatch,
    #[error("projection needs at least 3 points, got {got}")]
    TooFewPoints { got: usize },
    #[error("vectors in a batch must share one positive dimension")]
    DimensionMismatch,
    #[error("vectors contain non-finite values")]
    NonFinite,
    #[error("invalid scatter parameters: {0}")]
    InvalidParams(String),
    #[error("insufficient data for scatterplot")]
    InsufficientData,
    #[error(transparent)]
    Index(#[from] IndexError),
}

/// What a payload was computed from; enough to recompute it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterParams {
    pub term: String,
    pub eps: f64,
    pub min_pts: usize,
    pub seed: u64,
    pub cap: usize,
    pub embedder: String,
}

/// Index-aligned point arrays, as served to the UI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterPayload {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Cluster id, or -1 for noise.
    pub label: Vec<i32>,
    pub community: Vec<Community>,
    pub doc_id: Vec<String>,
    /// Original text shown on hover.
    pub text: Vec<String>,
    pub params: ScatterParams,
}

impl ScatterPayload {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn clusters(&self) -> usize {
        self.label.iter().filter(|&&l| l != NOISE).map(|&l| l as usize + 1).max().unwrap_or(0)
    }

    pub fn noise(&self) -> usize {
        self.label.iter().filter(|&&l| l == NOISE).count()
    }
}

/// Scales a centered point cloud by its largest absolute coordinate so it
/// fits [-1, 1]² with the aspect ratio kept.
pub fn rescale(coords: &mut [[f64; 2]]) {
    let extent = coords.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    if extent > 0.0 {
        coords.iter_mut().flatten().for_each(|v| *v /= extent);
    }
}

/// Embeds, projects and clusters the union of both communities' samples.
pub fn scatter_from_samples(
    samples: &[SampleSet],
    embedder: &dyn Embedder,
    params: ClusterParams,
) -> Result<(Vec<[f64; 2]>, Vec<i32>), ScatterError> {
    params.validate()?;
    let texts: Vec<String> = samples.iter().flat_map(|s| s.texts.iter().cloned()).collect();
    if texts.len() < 3 {
        return Err(ScatterError::InsufficientData);
    }
    let vectors = embedder.embed(&texts)?;
    let mut coords = project_2d(&vectors)?.coords;
    rescale(&mut coords);
    let labels = dbscan(&coords, params)?;
    Ok((coords, labels))
}

/// Scatter payload for `term`, drawn from the same samples the generation
/// endpoints use for (term, community, seed, cap).
pub fn build_scatter(
    index: &InvertedIndex,
    term: &str,
    seed: u64,
    cap: usize,
    embedder: &dyn Embedder,
    params: ClusterParams,
) -> Result<ScatterPayload, ScatterError> {
    let samples = Community::BOTH
        .into_iter()
        .map(|c| sample_matches(index, term, c, cap, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let (coords, labels) = scatter_from_samples(&samples, embedder, params)?;
    let tags = samples.iter().flat_map(|s| std::iter::repeat_n(s.community, s.len()));
    Ok(ScatterPayload {
        x: coords.iter().map(|c| c[0]).collect(),
        y: coords.iter().map(|c| c[1]).collect(),
        label: labels,
        community: tags.collect(),
        doc_id: samples.iter().flat_map(|s| s.doc_ids.iter().cloned()).collect(),
        text: samples.iter().flat_map(|s| s.texts.iter().cloned()).collect(),
        params: ScatterParams {
            term: samples[0].term.clone(),
            eps: params.eps,
            min_pts: params.min_pts,
            seed,
            cap,
            embedder: embedder.id(),
        },
    })
}
