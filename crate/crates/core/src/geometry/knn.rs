use std::cmp::Ordering;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::GeometryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    #[default]
    L2,
    Cosine,
}

/// Distance under `metric`. L2 is the Euclidean distance; cosine distance is
/// `1 - cos`, with a zero vector treated as orthogonal to everything.
pub fn distance(a: &[f32], b: &[f32], metric: DistanceMetric) -> f64 {
    match metric {
        DistanceMetric::L2 => squared_l2(a, b).sqrt(),
        DistanceMetric::Cosine => {
            let (mut ab, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
            for (&x, &y) in a.iter().zip(b) {
                let (x, y) = (x as f64, y as f64);
                ab += x * y;
                aa += x * x;
                bb += y * y;
            }
            let denom = (aa * bb).sqrt();
            if denom == 0.0 {
                1.0
            } else {
                1.0 - (ab / denom).clamp(-1.0, 1.0)
            }
        }
    }
}

fn squared_l2(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

/// Ranking key; L2 ranks on squared distance, which orders identically.
fn rank_key(a: &[f32], b: &[f32], metric: DistanceMetric) -> f64 {
    match metric {
        DistanceMetric::L2 => squared_l2(a, b),
        DistanceMetric::Cosine => distance(a, b, metric),
    }
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

fn keyed_candidates(
    query: usize,
    candidates: ArrayView2<f32>,
    metric: DistanceMetric,
) -> Result<Vec<(f64, usize)>, GeometryError> {
    let n = candidates.nrows();
    if query >= n {
        return Err(GeometryError::QueryOutOfRange {
            index: query,
            rows: n,
        });
    }
    let q = candidates.row(query).to_vec();
    Ok((0..n)
        .filter(|&i| i != query)
        .map(|i| {
            let c = candidates.row(i);
            let key = match c.as_slice() {
                Some(s) => rank_key(&q, s, metric),
                None => rank_key(&q, &c.to_vec(), metric),
            };
            (key, i)
        })
        .collect())
}

/// Indices of the `k` rows nearest to row `query`, nearest first. The query
/// row is never its own neighbor; equal distances order by ascending index.
pub fn knn(
    query: usize,
    candidates: ArrayView2<f32>,
    k: usize,
    metric: DistanceMetric,
) -> Result<Vec<usize>, GeometryError> {
    let n = candidates.nrows();
    if k == 0 || k + 1 > n {
        return Err(GeometryError::KOutOfRange {
            k,
            candidates: n.saturating_sub(1),
        });
    }
    let mut keyed = keyed_candidates(query, candidates, metric)?;
    if k < keyed.len() {
        keyed.select_nth_unstable_by(k - 1, by_distance_then_index);
        keyed.truncate(k);
    }
    keyed.sort_unstable_by(by_distance_then_index);
    Ok(keyed.into_iter().map(|(_, i)| i).collect())
}

/// Every other row, nearest first (the full ranking used by the retrieval
/// metrics).
pub fn ranked_neighbors(
    query: usize,
    candidates: ArrayView2<f32>,
    metric: DistanceMetric,
) -> Result<Vec<usize>, GeometryError> {
    let mut keyed = keyed_candidates(query, candidates, metric)?;
    keyed.sort_unstable_by(by_distance_then_index);
    Ok(keyed.into_iter().map(|(_, i)| i).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn three_point_example() {
        let pts = array![[0.0f32, 0.0], [1.0, 0.0], [0.0, 3.0]];
        assert_eq!(knn(0, pts.view(), 2, DistanceMetric::L2).unwrap(), vec![1, 2]);
    }

    #[test]
    fn ties_break_by_index() {
        let pts = array![[0.0f32, 0.0], [0.0, 1.0], [1.0, 0.0], [-1.0, 0.0]];
        assert_eq!(knn(0, pts.view(), 1, DistanceMetric::L2).unwrap(), vec![1]);
        assert_eq!(knn(0, pts.view(), 3, DistanceMetric::L2).unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn k_range() {
        let pts = array![[0.0f32], [1.0], [2.0]];
        assert!(matches!(
            knn(0, pts.view(), 3, DistanceMetric::L2),
            Err(GeometryError::KOutOfRange { .. })
        ));
        assert!(matches!(
            knn(0, pts.view(), 0, DistanceMetric::L2),
            Err(GeometryError::KOutOfRange { .. })
        ));
        assert!(matches!(
            knn(5, pts.view(), 1, DistanceMetric::L2),
            Err(GeometryError::QueryOutOfRange { .. })
        ));
        assert_eq!(knn(2, pts.view(), 2, DistanceMetric::L2).unwrap(), vec![1, 0]);
    }

    #[test]
    fn cosine_distance() {
        assert_eq!(distance(&[1.0, 0.0], &[2.0, 0.0], DistanceMetric::Cosine), 0.0);
        assert_eq!(distance(&[1.0, 0.0], &[0.0, 5.0], DistanceMetric::Cosine), 1.0);
        assert_eq!(distance(&[1.0, 0.0], &[-1.0, 0.0], DistanceMetric::Cosine), 2.0);
        assert_eq!(distance(&[0.0, 0.0], &[3.0, 4.0], DistanceMetric::L2), 5.0);
        let pts = array![[1.0f32, 0.0], [10.0, 1.0], [0.0, 1.0]];
        assert_eq!(knn(0, pts.view(), 2, DistanceMetric::Cosine).unwrap(), vec![1, 2]);
    }
}
