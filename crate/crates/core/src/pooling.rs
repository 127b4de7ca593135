//! Reduction of token activations (or static word vectors) to one vector per
//! document.
//!
//! Contextual strategies read an [`ActivationMatrix`] and trust its special
//! mask: classification, separator and padding tokens never enter a mean.
//! Contextual outputs are left unnormalized. Only the static word-vector
//! strategy normalizes, and it does so per word before averaging.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activation::{
    align_subwords, ActivationMatrix, WordAlignment, WordVectorTable, DEFAULT_CONTINUATION_MARKER,
};

/// Default character threshold for [`pool_long_tokens`].
pub const DEFAULT_MIN_CHARS: usize = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PoolingError {
    #[error("pmid {pmid}: nothing to pool")]
    EmptyPool { pmid: u64 },
    #[error("pmid {pmid}: first token is not a classification token")]
    MissingCls { pmid: u64 },
    #[error("pmid {pmid}: alignment refers to token {index}, which is special or out of range")]
    BadAlignment { pmid: u64, index: usize },
    #[error("unknown pooling strategy {0:?}")]
    UnknownStrategy(String),
    #[error("strategy {0} needs word vectors, not activations")]
    NeedsWordVectors(Strategy),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    MeanTokens,
    Cls,
    MeanLongTokens,
    ClsConcatMean,
    MeanWords,
    StaticMean,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::MeanTokens,
        Strategy::Cls,
        Strategy::MeanLongTokens,
        Strategy::ClsConcatMean,
        Strategy::MeanWords,
        Strategy::StaticMean,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::MeanTokens => "mean_tokens",
            Strategy::Cls => "cls",
            Strategy::MeanLongTokens => "mean_long_tokens",
            Strategy::ClsConcatMean => "cls_concat_mean",
            Strategy::MeanWords => "mean_words",
            Strategy::StaticMean => "static_mean",
        }
    }

    /// Output width for an input of width `d`.
    pub fn output_dim(self, d: usize) -> usize {
        match self {
            Strategy::ClsConcatMean => 2 * d,
            _ => d,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = PoolingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| PoolingError::UnknownStrategy(s.to_string()))
    }
}

/// One document embedding and how it was made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledVector {
    pub pmid: u64,
    pub strategy: Strategy,
    pub vector: Vec<f32>,
    /// Set when [`pool_long_tokens`] found no long token and averaged all
    /// regular tokens instead.
    pub fallback: bool,
}

/// Options for the contextual strategies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolOptions {
    pub min_chars: usize,
    pub continuation_marker: String,
}

impl Default for PoolOptions {
    fn default() -> Self {
        PoolOptions {
            min_chars: DEFAULT_MIN_CHARS,
            continuation_marker: DEFAULT_CONTINUATION_MARKER.to_string(),
        }
    }
}

fn mean_of_rows(m: &ActivationMatrix, indices: impl IntoIterator<Item = usize>) -> Option<Vec<f32>> {
    let mut acc = vec![0.0f64; m.dim()];
    let mut n = 0usize;
    for i in indices {
        for (a, &v) in acc.iter_mut().zip(m.rows().row(i)) {
            *a += v as f64;
        }
        n += 1;
    }
    (n > 0).then(|| acc.iter().map(|a| (a / n as f64) as f32).collect())
}

fn pooled(m: &ActivationMatrix, strategy: Strategy, vector: Vec<f32>) -> PooledVector {
    PooledVector {
        pmid: m.pmid(),
        strategy,
        vector,
        fallback: false,
    }
}

/// Mean of all regular token rows.
pub fn pool_mean_tokens(m: &ActivationMatrix) -> Result<PooledVector, PoolingError> {
    let v = mean_of_rows(m, m.regular_indices()).ok_or(PoolingError::EmptyPool { pmid: m.pmid() })?;
    Ok(pooled(m, Strategy::MeanTokens, v))
}

/// Activation of the leading classification token.
pub fn pool_cls(m: &ActivationMatrix) -> Result<PooledVector, PoolingError> {
    if !m.special_mask().first().copied().unwrap_or(false) {
        return Err(PoolingError::MissingCls { pmid: m.pmid() });
    }
    Ok(pooled(m, Strategy::Cls, m.rows().row(0).to_vec()))
}

/// Mean over regular tokens whose text, minus the continuation marker, has
/// at least `min_chars` characters. Falls back to [`pool_mean_tokens`] (with
/// the `fallback` flag set) when no token qualifies.
pub fn pool_long_tokens(
    m: &ActivationMatrix,
    min_chars: usize,
    marker: &str,
) -> Result<PooledVector, PoolingError> {
    let long = m.regular_indices().filter(|&i| {
        let token = m.tokens()[i].as_str();
        let content = if marker.is_empty() {
            token
        } else {
            token.strip_prefix(marker).unwrap_or(token)
        };
        content.chars().count() >= min_chars
    });
    match mean_of_rows(m, long) {
        Some(v) => Ok(pooled(m, Strategy::MeanLongTokens, v)),
        None => {
            let mut out = pool_mean_tokens(m)?;
            out.strategy = Strategy::MeanLongTokens;
            out.fallback = true;
            Ok(out)
        }
    }
}

/// Classification-token activation followed by the regular-token mean.
pub fn pool_cls_concat_mean(m: &ActivationMatrix) -> Result<PooledVector, PoolingError> {
    let mut v = pool_cls(m)?.vector;
    v.extend(pool_mean_tokens(m)?.vector);
    Ok(pooled(m, Strategy::ClsConcatMean, v))
}

/// Two-stage mean: subword rows averaged per word, then words averaged.
pub fn pool_mean_words(
    m: &ActivationMatrix,
    alignment: &WordAlignment,
) -> Result<PooledVector, PoolingError> {
    if alignment.is_empty() {
        return Err(PoolingError::EmptyPool { pmid: m.pmid() });
    }
    let mut acc = vec![0.0f64; m.dim()];
    for group in &alignment.groups {
        if let Some(&index) = group
            .iter()
            .find(|&&i| i >= m.len() || m.special_mask()[i])
        {
            return Err(PoolingError::BadAlignment {
                pmid: m.pmid(),
                index,
            });
        }
        let word = mean_of_rows(m, group.iter().copied())
            .ok_or(PoolingError::EmptyPool { pmid: m.pmid() })?;
        for (a, w) in acc.iter_mut().zip(word) {
            *a += w as f64;
        }
    }
    let n = alignment.len() as f64;
    let v = acc.iter().map(|a| (a / n) as f32).collect();
    Ok(pooled(m, Strategy::MeanWords, v))
}

/// Mean of unit-normalized static word vectors. Out-of-vocabulary words (and
/// zero vectors, which have no direction) are left out of both the sum and
/// the count.
pub fn pool_static_mean<S: AsRef<str>>(
    pmid: u64,
    words: &[S],
    table: &WordVectorTable,
) -> Result<PooledVector, PoolingError> {
    let mut acc = vec![0.0f64; table.dim()];
    let mut n = 0usize;
    for word in words {
        let Some(v) = table.lookup(word.as_ref()) else {
            continue;
        };
        let norm = v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        for (a, &x) in acc.iter_mut().zip(v) {
            *a += x as f64 / norm;
        }
        n += 1;
    }
    if n == 0 {
        return Err(PoolingError::EmptyPool { pmid });
    }
    Ok(PooledVector {
        pmid,
        strategy: Strategy::StaticMean,
        vector: acc.iter().map(|a| (a / n as f64) as f32).collect(),
        fallback: false,
    })
}

/// Splits normalized text into surface words for static lookup: whitespace
/// separated, with leading and trailing ASCII punctuation removed.
pub fn surface_words(text: &str) -> Vec<&str> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| c.is_ascii_punctuation()))
        .filter(|w| !w.is_empty())
        .collect()
}

/// Applies any contextual strategy.
pub fn pool(
    m: &ActivationMatrix,
    strategy: Strategy,
    options: &PoolOptions,
) -> Result<PooledVector, PoolingError> {
    match strategy {
        Strategy::MeanTokens => pool_mean_tokens(m),
        Strategy::Cls => pool_cls(m),
        Strategy::MeanLongTokens => {
            pool_long_tokens(m, options.min_chars, &options.continuation_marker)
        }
        Strategy::ClsConcatMean => pool_cls_concat_mean(m),
        Strategy::MeanWords => {
            let alignment = align_subwords(m.tokens(), m.special_mask(), &options.continuation_marker);
            pool_mean_words(m, &alignment)
        }
        Strategy::StaticMean => Err(PoolingError::NeedsWordVectors(strategy)),
    }
}
