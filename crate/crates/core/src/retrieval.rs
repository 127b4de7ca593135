//! Journal-discriminability benchmark: precision@k, precision@R and MAP@R
//! over exact L2 neighbor rankings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{knn, ranked_neighbors, sample_indices, DistanceMetric, GeometryError};
use crate::numeric::pairwise_mean;

pub const DEFAULT_K: usize = 500;
pub const DEFAULT_QUERIES: usize = 5000;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("pool rows, labels and pmids disagree: {rows} rows, {labels} labels, {pmids} pmids")]
    Misaligned { rows: usize, labels: usize, pmids: usize },
    #[error("label {label:?} has a single member; R is undefined")]
    UndefinedR { label: String },
    #[error("requested {requested} queries from a pool of {available}")]
    TooManyQueries { requested: usize, available: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Embeddings with one label (journal) and pmid per row.
#[derive(Debug, Clone)]
pub struct LabeledPool {
    vectors: Array2<f32>,
    pmids: Vec<u64>,
    label_ids: Vec<usize>,
    label_names: Vec<String>,
    label_sizes: Vec<usize>,
}

impl LabeledPool {
    pub fn new(vectors: Array2<f32>, labels: Vec<String>, pmids: Vec<u64>) -> Result<Self, RetrievalError> {
        if vectors.nrows() != labels.len() || labels.len() != pmids.len() {
            return Err(RetrievalError::Misaligned {
                rows: vectors.nrows(),
                labels: labels.len(),
                pmids: pmids.len(),
            });
        }
        let mut label_names: Vec<String> = labels.clone();
        label_names.sort();
        label_names.dedup();
        let label_ids: Vec<usize> = labels
            .iter()
            .map(|l| label_names.binary_search(l).expect("label collected above"))
            .collect();
        let mut label_sizes = vec![0; label_names.len()];
        for &id in &label_ids {
            label_sizes[id] += 1;
        }
        Ok(LabeledPool {
            vectors,
            pmids,
            label_ids,
            label_names,
            label_sizes,
        })
    }

    /// Pool with anonymous pmids `0..N`.
    pub fn from_labels(vectors: Array2<f32>, labels: Vec<String>) -> Result<Self, RetrievalError> {
        let pmids = (0..labels.len() as u64).collect();
        Self::new(vectors, labels, pmids)
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vectors(&self) -> ArrayView2<'_, f32> {
        self.vectors.view()
    }

    pub fn pmids(&self) -> &[u64] {
        &self.pmids
    }

    pub fn label(&self, row: usize) -> &str {
        &self.label_names[self.label_ids[row]]
    }

    /// Distinct labels in sorted order.
    pub fn labels(&self) -> &[String] {
        &self.label_names
    }

    fn same_label(&self, a: usize, b: usize) -> bool {
        self.label_ids[a] == self.label_ids[b]
    }

    fn check_query(&self, query: usize) -> Result<(), RetrievalError> {
        if query >= self.len() {
            return Err(GeometryError::QueryOutOfRange {
                index: query,
                rows: self.len(),
            }
            .into());
        }
        Ok(())
    }

    /// R for `query`: members of its label other than itself.
    pub fn r_for(&self, query: usize) -> Result<usize, RetrievalError> {
        self.check_query(query)?;
        match self.label_sizes[self.label_ids[query]] - 1 {
            0 => Err(RetrievalError::UndefinedR {
                label: self.label(query).to_string(),
            }),
            r => Ok(r),
        }
    }

    fn relevance(&self, query: usize, ranked: &[usize]) -> Vec<bool> {
        ranked.iter().map(|&i| self.same_label(query, i)).collect()
    }
}

fn fraction_relevant(relevant: &[bool]) -> f64 {
    relevant.iter().filter(|&&r| r).count() as f64 / relevant.len() as f64
}

/// Hits-normalized average precision over `relevant` (already cut at R).
fn average_precision(relevant: &[bool]) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, _) in relevant.iter().enumerate().filter(|(_, &r)| r) {
        hits += 1;
        sum += hits as f64 / (rank + 1) as f64;
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

/// Fraction of the `k` nearest neighbors of `query` sharing its label.
pub fn precision_at_k(pool: &LabeledPool, query: usize, k: usize) -> Result<f64, RetrievalError> {
    let neighbors = knn(query, pool.vectors(), k, DistanceMetric::L2)?;
    Ok(fraction_relevant(&pool.relevance(query, &neighbors)))
}

/// Precision@k with k = R, the number of other rows sharing the query's label.
pub fn precision_at_r(pool: &LabeledPool, query: usize) -> Result<f64, RetrievalError> {
    let r = pool.r_for(query)?;
    precision_at_k(pool, query, r)
}

/// Average precision within the top R, normalized by the hits found there.
pub fn map_at_r(pool: &LabeledPool, query: usize) -> Result<f64, RetrievalError> {
    let r = pool.r_for(query)?;
    let neighbors = knn(query, pool.vectors(), r, DistanceMetric::L2)?;
    Ok(average_precision(&pool.relevance(query, &neighbors)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryScores {
    pub precision_at_k: f64,
    pub precision_at_r: f64,
    pub map_at_r: f64,
}

/// All three scores from a single ranking of the candidates.
pub fn score_query(pool: &LabeledPool, query: usize, k: usize) -> Result<QueryScores, RetrievalError> {
    let r = pool.r_for(query)?;
    let n = pool.len().saturating_sub(1);
    if k == 0 || k > n {
        return Err(GeometryError::KOutOfRange { k, candidates: n }.into());
    }
    let ranked = ranked_neighbors(query, pool.vectors(), DistanceMetric::L2)?;
    let relevant = pool.relevance(query, &ranked);
    Ok(QueryScores {
        precision_at_k: fraction_relevant(&relevant[..k]),
        precision_at_r: fraction_relevant(&relevant[..r]),
        map_at_r: average_precision(&relevant[..r]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub k: usize,
    pub n_queries: usize,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            k: DEFAULT_K,
            n_queries: DEFAULT_QUERIES,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMeans {
    pub n_queries: usize,
    pub precision_at_k: f64,
    pub precision_at_r: f64,
    pub map_at_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    /// Encoder / pooling / post-processing identifier, usually the space id.
    pub identifier: String,
    pub n_queries: usize,
    pub seed: u64,
    pub k: usize,
    pub precision_at_k: f64,
    pub precision_at_r: f64,
    pub map_at_r: f64,
    pub per_label: BTreeMap<String, LabelMeans>,
}

fn means(scores: &[QueryScores]) -> (f64, f64, f64) {
    let col = |f: fn(&QueryScores) -> f64| {
        let v: Vec<f64> = scores.iter().map(f).collect();
        pairwise_mean(&v).unwrap_or(0.0)
    };
    (
        col(|s| s.precision_at_k),
        col(|s| s.precision_at_r),
        col(|s| s.map_at_r),
    )
}

/// Scores `n_queries` rows drawn without replacement under `seed`.
///
/// Queries run in parallel but results are gathered in sample order and
/// averaged by pairwise summation, so the report does not depend on the
/// thread count.
pub fn run_benchmark(
    pool: &LabeledPool,
    identifier: &str,
    config: &BenchmarkConfig,
) -> Result<RetrievalReport, RetrievalError> {
    if config.n_queries > pool.len() {
        return Err(RetrievalError::TooManyQueries {
            requested: config.n_queries,
            available: pool.len(),
        });
    }
    let queries = sample_indices(pool.len(), config.n_queries, config.seed);
    let scores: Vec<QueryScores> = queries
        .par_iter()
        .map(|&q| score_query(pool, q, config.k))
        .collect::<Result<_, _>>()?;

    let (p_k, p_r, map_r) = means(&scores);
    let mut grouped: BTreeMap<&str, Vec<QueryScores>> = BTreeMap::new();
    for (&q, s) in queries.iter().zip(&scores) {
        grouped.entry(pool.label(q)).or_default().push(*s);
    }
    let per_label = grouped
        .into_iter()
        .map(|(label, s)| {
            let (a, b, c) = means(&s);
            let m = LabelMeans {
                n_queries: s.len(),
                precision_at_k: a,
                precision_at_r: b,
                map_at_r: c,
            };
            (label.to_string(), m)
        })
        .collect();

    Ok(RetrievalReport {
        identifier: identifier.to_string(),
        n_queries: config.n_queries,
        seed: config.seed,
        k: config.k,
        precision_at_k: p_k,
        precision_at_r: p_r,
        map_at_r: map_r,
        per_label,
    })
}

/// One row per report: identifier, Precision@k, Precision@R, MAP@R, tab
/// separated with two decimals.
pub fn render_table(reports: &[RetrievalReport]) -> String {
    let k = reports.first().map_or(DEFAULT_K, |r| r.k);
    let mut out = format!("\tPrecision@{k}\tPrecision@R\tMAP@R\n");
    for r in reports {
        writeln!(
            out,
            "{}\t{:.2}\t{:.2}\t{:.2}",
            r.identifier, r.precision_at_k, r.precision_at_r, r.map_at_r
        )
        .unwrap();
    }
    out
}
