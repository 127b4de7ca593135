//! Small numeric helpers shared across modules.

/// Pairwise (cascade) summation. The result depends only on the order of
/// `values`, never on how work was scheduled.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Mean via [`pairwise_sum`] of the offsets from the first value, so a
/// constant slice averages to exactly that constant. `None` when empty.
pub fn pairwise_mean(values: &[f64]) -> Option<f64> {
    let first = *values.first()?;
    let offsets: Vec<f64> = values.iter().map(|v| v - first).collect();
    Some(first + pairwise_sum(&offsets) / values.len() as f64)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity, clamped to [-1, 1]. Computed as
/// `dot / sqrt(|a|^2 |b|^2)` so that identical vectors give exactly 1.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let denom = (dot(a, a) * dot(b, b)).sqrt();
    (denom > 0.0 && denom.is_finite()).then(|| (dot(a, b) / denom).clamp(-1.0, 1.0))
}

pub fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}
