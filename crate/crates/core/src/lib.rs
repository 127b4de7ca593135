//! Corpus-to-metrics toolkit for document embeddings.
//!
//! The pipeline runs: [`ingest`] PubMed XML into [`store`] records,
//! normalize text with [`text`], pool encoder activations ([`activation`],
//! [`pooling`]) into document vectors, fit a demeaned PCA space
//! ([`geometry`]), score it with the journal retrieval benchmark
//! ([`retrieval`]) and compute semantic [`metrics`] over sets of documents.

pub mod activation;
pub mod emb;
pub mod geometry;
pub mod ingest;
pub mod metrics;
pub mod numeric;
pub mod pooling;
pub mod retrieval;
pub mod store;
pub mod text;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Guide chapters, compiled here so their examples run as doctests.
#[cfg(doctest)]
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    pub mod corpus {}
    #[doc = include_str!("../../../book/src/text.md")]
    pub mod text {}
    #[doc = include_str!("../../../book/src/pooling.md")]
    pub mod pooling {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    pub mod geometry {}
    #[doc = include_str!("../../../book/src/retrieval.md")]
    pub mod retrieval {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    pub mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
    #[doc = include_str!("../../../book/src/formats.md")]
    pub mod formats {}
}
