use faer::Mat;

use super::ScatterError;

/// Top-2 principal components of a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    /// One (x, y) per input vector, in input order.
    pub coords: Vec<[f64; 2]>,
    /// Covariance eigenvalues of the two components (sample covariance, n - 1).
    pub variances: [f64; 2],
}

impl Projection {
    pub fn captured_variance(&self) -> f64 {
        self.variances[0] + self.variances[1]
    }
}

/// Relative size below which a component counts as absent.
const RANK_TOLERANCE: f64 = 1e-12;

/// Exact PCA onto two dimensions.
///
/// Each component's largest-magnitude loading is made positive. Components
/// with (numerically) zero variance project to 0, so a batch of identical
/// points maps entirely to (0, 0).
pub fn project_2d(vectors: &[Vec<f64>]) -> Result<Projection, ScatterError> {
    let n = vectors.len();
    if n < 3 {
        return Err(ScatterError::TooFewPoints { got: n });
    }
    let d = vectors[0].len();
    if d == 0 || vectors.iter().any(|v| v.len() != d) {
        return Err(ScatterError::DimensionMismatch);
    }
    if vectors.iter().flatten().any(|x| !x.is_finite()) {
        return Err(ScatterError::NonFinite);
    }
    let zeros = || Projection { coords: vec![[0.0; 2]; n], variances: [0.0; 2] };
    if vectors.iter().all(|v| v == &vectors[0]) {
        return Ok(zeros());
    }

    let mut centered = Mat::from_fn(n, d, |i, j| vectors[i][j]);
    for j in 0..d {
        let mean = (0..n).map(|i| centered[(i, j)]).sum::<f64>() / n as f64;
        for i in 0..n {
            centered[(i, j)] -= mean;
        }
    }
    // Right singular vectors of the centered data are the covariance
    // eigenvectors; eigenvalues are s² / (n - 1). Singular values come sorted.
    let svd = centered.thin_svd().map_err(|_| ScatterError::NonFinite)?;
    let (s, v) = (svd.S().column_vector(), svd.V());
    let eigenvalue = |k: usize| s[k].powi(2) / (n - 1) as f64;
    let largest = eigenvalue(0);
    if largest == 0.0 || !largest.is_finite() {
        return Ok(zeros());
    }

    let mut coords = vec![[0.0; 2]; n];
    let mut variances = [0.0; 2];
    for c in 0..2.min(s.nrows()) {
        let value = eigenvalue(c);
        if value <= largest * RANK_TOLERANCE {
            continue;
        }
        let pivot = (0..d).fold(0, |best, j| if v[(j, c)].abs() > v[(best, c)].abs() { j } else { best });
        let sign = if v[(pivot, c)] < 0.0 { -1.0 } else { 1.0 };
        for (i, point) in coords.iter_mut().enumerate() {
            point[c] = sign * (0..d).map(|j| centered[(i, j)] * v[(j, c)]).sum::<f64>();
        }
        variances[c] = value;
    }
    Ok(Projection { coords, variances })
}
