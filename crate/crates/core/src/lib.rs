//! Continual learning with frozen embeddings and nearest class means.
//!
//! The learner keeps one running mean per class and classifies by the
//! nearest mean. Around it sit an embedding file format, a synthetic data
//! generator, a linear-head comparator and a class-/domain-incremental
//! evaluation harness.

pub mod classifier;
pub mod config;
pub mod embedding;
pub mod error;
pub mod protocol;
pub mod prototype;
pub mod rng;
mod wire;

pub use error::{Error, Result};
