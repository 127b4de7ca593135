//! Semantic-space construction: mean estimation, demeaning, PCA, exact
//! nearest neighbors and an anisotropy diagnostic.

mod knn;
mod pca;

pub use knn::{distance, knn, ranked_neighbors, DistanceMetric};
pub use pca::{apply_pca, fit_pca, SemanticSpace, SPACE_MAGIC, SPACE_VERSION};

use std::io;

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{cosine, pairwise_mean};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("sample has no rows")]
    EmptySample,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("cannot extract {requested} components; at most {max} are available")]
    Rank { requested: usize, max: usize },
    #[error("k = {k} is out of range for {candidates} candidates")]
    KOutOfRange { k: usize, candidates: usize },
    #[error("query index {index} is out of range for {rows} rows")]
    QueryOutOfRange { index: usize, rows: usize },
    #[error("need at least two rows with nonzero norm, found {0}")]
    Degenerate(usize),
    #[error("bad semantic space file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Column-wise arithmetic mean, accumulated in double precision.
pub fn estimate_mean(sample: ArrayView2<f32>) -> Result<Vec<f32>, GeometryError> {
    if sample.nrows() == 0 {
        return Err(GeometryError::EmptySample);
    }
    Ok(column_mean_f64(sample).into_iter().map(|m| m as f32).collect())
}

pub(crate) fn column_mean_f64(sample: ArrayView2<f32>) -> Vec<f64> {
    let mut acc = vec![0.0f64; sample.ncols()];
    for row in sample.axis_iter(Axis(0)) {
        for (a, &v) in acc.iter_mut().zip(row) {
            *a += v as f64;
        }
    }
    let n = sample.nrows() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Subtracts `mean` from every row.
pub fn demean(vectors: ArrayView2<f32>, mean: &[f32]) -> Result<Array2<f32>, GeometryError> {
    if vectors.ncols() != mean.len() {
        return Err(GeometryError::DimensionMismatch {
            expected: mean.len(),
            actual: vectors.ncols(),
        });
    }
    let mut out = vectors.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        for (v, &m) in row.iter_mut().zip(mean) {
            *v -= m;
        }
    }
    Ok(out)
}

/// `k` distinct row indices drawn uniformly from `0..n` under `seed`,
/// returned in ascending order.
pub fn sample_indices(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, k.min(n)).into_vec();
    picked.sort_unstable();
    picked
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnisotropyReport {
    pub mean_cosine: f64,
    pub pairs: usize,
    pub seed: u64,
    /// Draws rejected because a sampled row had zero norm.
    pub resampled: usize,
}

/// Mean cosine similarity over `n_pairs` random pairs of distinct rows.
///
/// Raw encoder outputs tend to sit in a narrow cone, which shows up here as
/// a value well above zero; after demeaning it should be near zero.
pub fn anisotropy(
    sample: ArrayView2<f32>,
    n_pairs: usize,
    seed: u64,
) -> Result<AnisotropyReport, GeometryError> {
    let rows: Vec<Vec<f64>> = sample
        .axis_iter(Axis(0))
        .map(|r| r.iter().map(|&x| x as f64).collect())
        .collect();
    let nonzero = rows
        .iter()
        .filter(|r| r.iter().any(|&x| x != 0.0))
        .count();
    if nonzero < 2 {
        return Err(GeometryError::Degenerate(nonzero));
    }

    let n = rows.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sims = Vec::with_capacity(n_pairs);
    let mut resampled = 0;
    while sims.len() < n_pairs {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        match cosine(&rows[i], &rows[j]) {
            Some(c) => sims.push(c),
            None => resampled += 1,
        }
    }
    Ok(AnisotropyReport {
        mean_cosine: pairwise_mean(&sims).unwrap_or(0.0),
        pairs: n_pairs,
        seed,
        resampled,
    })
}
