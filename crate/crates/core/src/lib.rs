//! Learning musical transformations from binary piano-roll n-gram pairs.
//!
//! The crate builds labeled pairs of 65x8 piano-roll n-grams related by a
//! musical transformation (chromatic/diatonic transposition, tempo
//! change, retrograde), learns those transformations unsupervised with a
//! gated autoencoder and a stacked-RBM baseline, probes the learned
//! representations with a feed-forward classifier, and supports
//! analogy-making with transferred mapping codes. Everything is
//! deterministic per seed, including file formats.

pub mod analogy;
pub mod classifier;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod gae;
pub mod midi;
pub mod nn;
pub mod pianoroll;
pub mod pipeline;
pub mod rbm;
pub mod rng;
pub mod synth;
pub mod transforms;

pub use error::{Error, Result};
