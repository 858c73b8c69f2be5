//! Semantic question similarity with a siamese ON-LSTM encoder.
//!
//! The crate covers the whole pipeline:
//!
//! - [`preproc`]: punctuation separation and whitespace tokenization.
//! - [`augment`]: transitive, symmetric and reflexive expansion of labeled
//!   question pairs, plus the pair TSV format.
//! - [`embed`]: precomputed contextual embeddings (JSONL) and a deterministic
//!   stub provider.
//! - [`nncore`]: a small tape-based reverse-mode differentiation engine,
//!   Adam, and a finite-difference gradient checker.
//! - [`model`]: stacked bidirectional ON-LSTM layers, weighted attention
//!   pooling, the squared-difference merge and the MLP decision head.
//! - [`train`]: minibatch training, F1 metrics and the five-replica
//!   ensemble report.

pub mod augment;
pub mod embed;
mod error;
pub mod model;
pub mod nncore;
pub mod preproc;
pub mod train;

pub use error::{Error, Result};
