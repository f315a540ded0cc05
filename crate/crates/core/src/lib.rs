//! Language-separability guided data selection for multilingual
//! instruction tuning.
//!
//! The pipeline scores each sample by its silhouette with respect to the
//! language clusters of an embedding matrix ([`separability`]), keeps the
//! most separable share of every language ([`selectors::preselect_topk`]),
//! refines that pool with a downstream selector ([`selectors`]) and orders
//! the result for training ([`curriculum`]). [`reporting`] produces the
//! diagnostics.
//!
//! Matrices are generic over their element type ([`Scalar`]); files on disk
//! are always binary32 and load as [`EmbeddingMatrix`].

pub mod corpus;
pub mod curriculum;
pub mod embedding;
mod error;
pub mod hash;
mod kernel;
pub mod manifest;
pub mod reporting;
pub mod rng;
mod scalar;
pub mod selectors;
pub mod separability;

pub use corpus::{load_corpus, Corpus, Sample};
pub use embedding::{load_embeddings, validate_alignment, write_embeddings, Embeddings};
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use separability::{score_corpus, ScoreOptions, ScoreRecord, ScoreTable};

/// Matrix as stored on disk.
pub type EmbeddingMatrix = Embeddings<f32>;
/// Double-precision matrix, mostly for synthetic data and oracles.
pub type EmbeddingMatrix64 = Embeddings<f64>;

pub const TOOL_VERSION: &str = concat!("langgps ", env!("CARGO_PKG_VERSION"));
