//! Semantic metrics over sets of embedded elements: centroids, breadth,
//! distances between sets, novelty, axes and archetype mixtures, and
//! perplexity from per-token losses.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::DistanceMetric;
use crate::numeric::{cosine, norm, pairwise_mean, widen};

pub const DEFAULT_PERCENTILE: f64 = 90.0;

/// Relative tolerance below which a singular value counts as zero.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("set {name:?} needs at least {needed} elements, has {found}")]
    TooFewElements { name: String, needed: usize, found: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("set {name:?} has a zero centroid; cosine distance is undefined")]
    ZeroCentroid { name: String },
    #[error("distance sample is empty")]
    EmptySample,
    #[error("percentile {0} is outside (0, 100)")]
    BadPercentile(f64),
    #[error("axis needs equally many positive and negative sets, got {positive} and {negative}")]
    UnpairedAxis { positive: usize, negative: usize },
    #[error("axis pair {index} has identical centroids")]
    DegeneratePair { index: usize },
    #[error("document vector has zero norm")]
    ZeroVector,
    #[error("need at least 2 archetypes, got {0}")]
    TooFewArchetypes(usize),
    #[error("archetypes are linearly dependent (rank {rank} of {k})")]
    RankDeficient { rank: usize, k: usize },
    #[error("loss sequence is empty")]
    NoLosses,
    #[error("loss {index} is {value}; losses must be finite and nonnegative")]
    BadLoss { index: usize, value: f64 },
}

/// A named collection of element vectors (documents, words, keywords).
#[derive(Debug, Clone, PartialEq)]
pub struct ElementSet {
    pub name: String,
    pub vectors: Array2<f32>,
    pub ids: Option<Vec<u64>>,
}

impl ElementSet {
    pub fn new(name: impl Into<String>, vectors: Array2<f32>) -> Self {
        ElementSet {
            name: name.into(),
            vectors,
            ids: None,
        }
    }

    pub fn with_ids(mut self, ids: Vec<u64>) -> Self {
        self.ids = Some(ids);
        self
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    fn require(&self, needed: usize) -> Result<(), MetricsError> {
        if self.len() < needed {
            return Err(MetricsError::TooFewElements {
                name: self.name.clone(),
                needed,
                found: self.len(),
            });
        }
        Ok(())
    }

    fn rows_f64(&self) -> Vec<Vec<f64>> {
        rows_f64(self.vectors.view())
    }
}

fn rows_f64(v: ArrayView2<f32>) -> Vec<Vec<f64>> {
    v.axis_iter(Axis(0))
        .map(|r| r.iter().map(|&x| x as f64).collect())
        .collect()
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn check_dim(expected: usize, actual: usize) -> Result<(), MetricsError> {
    if expected != actual {
        return Err(MetricsError::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Arithmetic mean of the rows.
pub fn centroid(s: &ElementSet) -> Result<Vec<f64>, MetricsError> {
    s.require(1)?;
    let rows = s.rows_f64();
    Ok((0..s.dim())
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            pairwise_mean(&col).expect("nonempty")
        })
        .collect())
}

/// `per_pair` applied to every unordered pair distance, upper triangle in
/// row-major order. Rows run in parallel; the output order is fixed.
fn upper_pair_distances<T, F>(rows: &[Vec<f64>], per_pair: F) -> Vec<T>
where
    T: Send,
    F: Fn(f64) -> T + Sync,
{
    let per_row: Vec<Vec<T>> = (0..rows.len())
        .into_par_iter()
        .map(|i| {
            rows[i + 1..]
                .iter()
                .map(|r| per_pair(l2(&rows[i], r)))
                .collect()
        })
        .collect();
    per_row.into_iter().flatten().collect()
}

/// All M(M-1)/2 pairwise L2 distances, row-major over the upper triangle.
pub fn pairwise_distances(s: &ElementSet) -> Vec<f64> {
    upper_pair_distances(&s.rows_f64(), |d| d)
}

/// Mean L2 distance over all unordered pairs.
pub fn breadth_pairwise(s: &ElementSet) -> Result<f64, MetricsError> {
    s.require(2)?;
    Ok(pairwise_mean(&pairwise_distances(s)).expect("at least one pair"))
}

/// Mean L2 distance of each element from the centroid.
pub fn breadth_sigma(s: &ElementSet) -> Result<f64, MetricsError> {
    let c = centroid(s)?;
    let d: Vec<f64> = s.rows_f64().iter().map(|r| l2(r, &c)).collect();
    Ok(pairwise_mean(&d).expect("nonempty"))
}

/// Distance between the centroids of `a` and `b`.
pub fn set_distance(a: &ElementSet, b: &ElementSet, metric: DistanceMetric) -> Result<f64, MetricsError> {
    let ca = centroid(a)?;
    let cb = centroid(b)?;
    check_dim(ca.len(), cb.len())?;
    match metric {
        DistanceMetric::L2 => Ok(l2(&ca, &cb)),
        DistanceMetric::Cosine => {
            for (c, s) in [(&ca, a), (&cb, b)] {
                if c.iter().all(|&x| x == 0.0) {
                    return Err(MetricsError::ZeroCentroid { name: s.name.clone() });
                }
            }
            Ok(1.0 - cosine(&ca, &cb).expect("nonzero centroids"))
        }
    }
}

/// Nearest-rank percentile: the value at rank `ceil(p * n / 100)` of the
/// sorted sample.
pub fn distance_threshold(sample: &[f64], percentile: f64) -> Result<f64, MetricsError> {
    if sample.is_empty() {
        return Err(MetricsError::EmptySample);
    }
    if !(percentile > 0.0 && percentile < 100.0) {
        return Err(MetricsError::BadPercentile(percentile));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (percentile * sorted.len() as f64 / 100.0).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Distances between `n_pairs` random pairs of distinct rows, drawn with
/// replacement under `seed`; a reference sample for [`distance_threshold`].
pub fn sample_pair_distances(s: &ElementSet, n_pairs: usize, seed: u64) -> Result<Vec<f64>, MetricsError> {
    s.require(2)?;
    let rows = s.rows_f64();
    let n = rows.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_pairs)
        .map(|_| {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            l2(&rows[i], &rows[j])
        })
        .collect())
}

/// Fraction of unordered pairs farther apart than `threshold`.
pub fn novelty_fraction(s: &ElementSet, threshold: f64) -> Result<f64, MetricsError> {
    s.require(2)?;
    let above = upper_pair_distances(&s.rows_f64(), |d| (d > threshold) as u64);
    let pairs = above.len();
    Ok(above.into_iter().sum::<u64>() as f64 / pairs as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticAxis {
    pub vector: Vec<f64>,
    /// (positive, negative) set names, one per anchor pair.
    pub pairs: Vec<(String, String)>,
}

/// Mean of the unit-normalized centroid differences `positive_i - negative_i`.
pub fn build_axis(positive: &[ElementSet], negative: &[ElementSet]) -> Result<SemanticAxis, MetricsError> {
    if positive.len() != negative.len() || positive.is_empty() {
        return Err(MetricsError::UnpairedAxis {
            positive: positive.len(),
            negative: negative.len(),
        });
    }
    let dim = positive[0].dim();
    let mut units = Vec::with_capacity(positive.len());
    for (index, (p, n)) in positive.iter().zip(negative).enumerate() {
        let cp = centroid(p)?;
        let cn = centroid(n)?;
        check_dim(dim, cp.len())?;
        check_dim(dim, cn.len())?;
        let d: Vec<f64> = cp.iter().zip(&cn).map(|(a, b)| a - b).collect();
        let len = norm(&d);
        if len == 0.0 {
            return Err(MetricsError::DegeneratePair { index });
        }
        units.push(d.into_iter().map(|x| x / len).collect::<Vec<f64>>());
    }
    let vector = (0..dim)
        .map(|j| {
            let col: Vec<f64> = units.iter().map(|u| u[j]).collect();
            pairwise_mean(&col).expect("nonempty")
        })
        .collect();
    Ok(SemanticAxis {
        vector,
        pairs: positive
            .iter()
            .zip(negative)
            .map(|(p, n)| (p.name.clone(), n.name.clone()))
            .collect(),
    })
}

/// Cosine between `doc` and the axis, in [-1, 1].
pub fn project_on_axis(doc: &[f32], axis: &SemanticAxis) -> Result<f64, MetricsError> {
    check_dim(axis.vector.len(), doc.len())?;
    cosine(&widen(doc), &axis.vector).ok_or(MetricsError::ZeroVector)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub weights: Vec<f64>,
    pub residual: f64,
    /// The document has no positive component in the archetype span; the
    /// weights are uniform by convention.
    pub degenerate: bool,
}

/// Least-squares coordinates of `doc` against the archetypes, negatives
/// clipped and renormalized to sum to one.
pub fn archetype_mixture(doc: &[f32], archetypes: &[Vec<f32>]) -> Result<Mixture, MetricsError> {
    let k = archetypes.len();
    if k < 2 {
        return Err(MetricsError::TooFewArchetypes(k));
    }
    let d = doc.len();
    for a in archetypes {
        check_dim(d, a.len())?;
    }
    let basis = DMatrix::from_fn(d, k, |i, j| archetypes[j][i] as f64);
    let target = DVector::from_iterator(d, doc.iter().map(|&x| x as f64));

    let svd = basis.clone().svd(true, true);
    let tol = RANK_TOLERANCE * svd.singular_values.max();
    let rank = svd.rank(tol);
    if rank < k {
        return Err(MetricsError::RankDeficient { rank, k });
    }
    let coords = svd.solve(&target, tol).expect("u and v computed");
    let projection = &basis * &coords;
    let residual = (&target - &projection).norm();

    let clipped: Vec<f64> = coords.iter().map(|&c| c.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let scale = target.norm().max(f64::MIN_POSITIVE);
    let degenerate = projection.norm() <= RANK_TOLERANCE * scale || total <= 0.0;
    let weights = if degenerate {
        vec![1.0 / k as f64; k]
    } else {
        clipped.iter().map(|c| c / total).collect()
    };
    Ok(Mixture {
        weights,
        residual,
        degenerate,
    })
}

/// `exp` of the mean per-token cross-entropy.
pub fn perplexity(losses: &[f64]) -> Result<f64, MetricsError> {
    if losses.is_empty() {
        return Err(MetricsError::NoLosses);
    }
    if let Some((index, &value)) = losses
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
    {
        return Err(MetricsError::BadLoss { index, value });
    }
    Ok(pairwise_mean(losses).expect("nonempty").exp())
}

/// Serialized form of one metric evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub metric: String,
    pub inputs: Vec<String>,
    pub value: serde_json::Value,
    pub parameters: BTreeMap<String, serde_json::Value>,
}
