use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::ScatterError;

pub const NOISE: i32 = -1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams { eps: 0.15, min_pts: 4 }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<(), ScatterError> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(ScatterError::InvalidParams(format!("eps must be a positive number, got {}", self.eps)));
        }
        if self.min_pts < 1 {
            return Err(ScatterError::InvalidParams("min_pts must be at least 1".into()));
        }
        Ok(())
    }
}

fn neighbors(points: &[[f64; 2]], i: usize, eps: f64) -> Vec<usize> {
    let [x, y] = points[i];
    (0..points.len())
        .filter(|&j| {
            let (dx, dy) = (points[j][0] - x, points[j][1] - y);
            dx * dx + dy * dy <= eps * eps
        })
        .collect()
}

/// DBSCAN over Euclidean 2D distance.
///
/// A point is core when at least `min_pts` points (itself included) lie
/// within `eps`. Clusters grow from unvisited core points in index order;
/// a border point joins the first cluster that reaches it. Noise is
/// [`NOISE`]; cluster ids are 0..k in order of first appearance.
pub fn dbscan(points: &[[f64; 2]], params: ClusterParams) -> Result<Vec<i32>, ScatterError> {
    params.validate()?;
    let hoods: Vec<Vec<usize>> = (0..points.len()).map(|i| neighbors(points, i, params.eps)).collect();
    let core: Vec<bool> = hoods.iter().map(|h| h.len() >= params.min_pts).collect();
    let mut labels = vec![NOISE; points.len()];
    let mut next = 0;
    for start in 0..points.len() {
        if !core[start] || labels[start] != NOISE {
            continue;
        }
        labels[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            for &q in &hoods[p] {
                if labels[q] == NOISE {
                    labels[q] = next;
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
        next += 1;
    }
    Ok(renumber(&labels))
}

/// Relabels clusters 0..k by first appearance, keeping noise.
pub fn renumber(labels: &[i32]) -> Vec<i32> {
    let mut seen: Vec<i32> = Vec::new();
    labels
        .iter()
        .map(|&l| {
            if l == NOISE {
                return NOISE;
            }
            match seen.iter().position(|&s| s == l) {
                Some(i) => i as i32,
                None => {
                    seen.push(l);
                    seen.len() as i32 - 1
                }
            }
        })
        .collect()
}
