//! Semi-supervised content/style fine-tuning on precomputed `[CLS]`
//! embeddings.
//!
//! A shared encoder splits each embedding into a content distribution over
//! `K` classes and a style vector; a decoder rebuilds the embedding from the
//! two. Paired (labeled) rows train the content head with cross-entropy.
//! Unpaired rows train everything through cosine reconstruction plus three
//! adversarial terms pushing content toward one-hot vectors, style toward
//! `N(0, I)`, and prior decodes toward real embeddings.

pub mod config;
pub mod error;
pub mod evaluator;
pub mod kernel;
pub mod nets;
pub mod objectives;
pub mod optimizer;
pub mod store;
pub mod trainer;

pub use error::{Error, Result};
