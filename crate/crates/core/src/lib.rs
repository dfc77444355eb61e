//! Pseudo-relevance feedback via per-topic text classification.
//!
//! The pipeline: index a JSON-lines corpus, produce a BM25 (optionally
//! BM25+RM3) base run, treat the top r hits of each topic as relevant and
//! the bottom n as non-relevant, train a linear classifier per topic on
//! L2-normalized tf-idf vectors, rescore the whole list, and interpolate
//! classifier and retrieval scores into the final ranking. Evaluation
//! covers AP/MAP, paired two-tailed t-tests with exact p-values, per-topic
//! delta buckets, and Kendall's tau between base and final runs at rank
//! cutoffs. Parameter tuning runs k-fold cross-validation over the
//! (r, n, alpha) grid.

pub mod analyze;
pub mod classify;
pub mod cv;
pub mod error;
pub mod eval;
pub mod index;
pub mod optim;
pub mod porter;
pub mod report;
pub mod rerank;
pub mod retrieval;
pub mod runio;
pub mod snapshot;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
