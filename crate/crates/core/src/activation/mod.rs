//! Token-level encoder output and the formats that carry it into the pipeline.

mod align;
mod container;
mod probe;
mod wordvec;

pub use align::{align_subwords, WordAlignment, DEFAULT_CONTINUATION_MARKER};
pub use container::{
    read_container, write_container, ContainerError, ContainerReader, CONTAINER_MAGIC,
    CONTAINER_VERSION, FLAG_LOSSES,
};
pub use probe::{collect_probe_occurrences, ProbeOccurrence};
pub use wordvec::{load_word_vectors, WordVectorError, WordVectorTable};

use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ActivationError {
    #[error("pmid {pmid}: {tokens} tokens, {mask} mask entries, {rows} activation rows")]
    LengthMismatch {
        pmid: u64,
        tokens: usize,
        mask: usize,
        rows: usize,
    },
    #[error("pmid {pmid}: non-finite activation at token {token}")]
    NonFiniteActivation { pmid: u64, token: usize },
    #[error("pmid {pmid}: {losses} losses for {tokens} tokens")]
    LossCount {
        pmid: u64,
        losses: usize,
        tokens: usize,
    },
    #[error("pmid {pmid}: loss at token {token} is negative or non-finite")]
    BadLoss { pmid: u64, token: usize },
}

/// Top-layer activations for one encoded document.
///
/// Row `i` of `rows` is the activation of `tokens[i]`; `special_mask[i]` is
/// true for classification, separator and padding tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMatrix {
    pmid: u64,
    tokens: Vec<String>,
    special_mask: Vec<bool>,
    rows: Array2<f32>,
    losses: Option<Vec<f32>>,
}

impl ActivationMatrix {
    pub fn new(
        pmid: u64,
        tokens: Vec<String>,
        special_mask: Vec<bool>,
        rows: Array2<f32>,
        losses: Option<Vec<f32>>,
    ) -> Result<Self, ActivationError> {
        if tokens.len() != special_mask.len() || tokens.len() != rows.nrows() {
            return Err(ActivationError::LengthMismatch {
                pmid,
                tokens: tokens.len(),
                mask: special_mask.len(),
                rows: rows.nrows(),
            });
        }
        for (token, row) in rows.rows().into_iter().enumerate() {
            if !row.iter().all(|v| v.is_finite()) {
                return Err(ActivationError::NonFiniteActivation { pmid, token });
            }
        }
        if let Some(losses) = &losses {
            if losses.len() != tokens.len() {
                return Err(ActivationError::LossCount {
                    pmid,
                    losses: losses.len(),
                    tokens: tokens.len(),
                });
            }
            if let Some(token) = losses.iter().position(|l| !(l.is_finite() && *l >= 0.0)) {
                return Err(ActivationError::BadLoss { pmid, token });
            }
        }
        Ok(ActivationMatrix {
            pmid,
            tokens,
            special_mask,
            rows,
            losses,
        })
    }

    pub fn pmid(&self) -> u64 {
        self.pmid
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn special_mask(&self) -> &[bool] {
        &self.special_mask
    }

    pub fn rows(&self) -> &Array2<f32> {
        &self.rows
    }

    pub fn losses(&self) -> Option<&[f32]> {
        self.losses.as_deref()
    }

    /// Token count T.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Activation width D.
    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    /// Indices of non-special tokens.
    pub fn regular_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.special_mask
            .iter()
            .enumerate()
            .filter(|(_, &special)| !special)
            .map(|(i, _)| i)
    }
}
