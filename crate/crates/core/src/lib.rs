//! Word-embedding training over a shared co-occurrence pipeline.
//!
//! The crate implements two objectives on top of one counting pipeline:
//!
//! * [`glove`]: weighted least squares against `log #(w,c)` with free
//!   per-word and per-context biases, trained with AdaGrad.
//! * [`sgns`]: skip-gram with negative sampling, both in its expected
//!   (per-cell) form and as the usual sampled stream trainer.
//!
//! [`pmi`] computes the shifted-PMI matrix that SGNS factorizes at its
//! optimum, and [`analysis`] tracks how GloVe's learned biases line up
//! with the log marginal counts that the shifted-PMI form fixes.
//! [`experiment`] wires all of this into one reproducible run.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cooccur;
pub mod corpus;
mod error;
pub mod experiment;
pub mod glove;
mod hogwild;
pub mod io;
pub mod manifest;
pub mod pmi;
pub mod sgns;

pub use analysis::{pearson_r, BiasTrace, TraceRecord};
pub use cooccur::{CoocCell, CoocTable};
pub use corpus::{TokenStream, Vocabulary};
pub use error::{Error, Result};
pub use glove::{GloveParams, TrainConfig, WeightingConfig};
pub use manifest::RunManifest;
pub use pmi::PmiMatrix;
pub use sgns::{SgnsConfig, SgnsParams};
