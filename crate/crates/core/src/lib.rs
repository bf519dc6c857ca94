//! Training and tuning lab for multi-label text classification with a
//! max-pooled convolutional baseline (CNN) and convolution with label-wise
//! attention (CAML).
//!
//! The crate is organised along the experiment pipeline:
//!
//! * [`corpus`] ingests pre-tokenised TSV documents, builds the vocabulary
//!   and label space, loads pretrained embeddings and produces length-sorted
//!   padded batches.
//! * [`nn`] holds the model parameters, forward passes, the binary
//!   cross-entropy loss and analytic gradients.
//! * [`trainer`] runs Adam with patience-based early stopping on validation
//!   precision@n.
//! * [`metrics`] computes Micro-F1, both Macro-F1 definitions and P@n.
//! * [`tuner`] enumerates the hyperparameter grid, runs trials across seeds
//!   and aggregates the best models per seed.
//! * [`cli`] wires everything into the `attnlab` binary.

pub mod cli;
pub mod config;
pub mod corpus;
mod error;
pub mod metrics;
pub mod nn;
pub mod trainer;
pub mod tuner;

pub use error::{Error, Result};
