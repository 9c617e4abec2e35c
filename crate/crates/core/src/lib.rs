#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Cognitive modeling of how people read feature attribution explanations.
//!
//! The crate covers the whole desk pipeline: tabular data and the AI models
//! being explained, explanation generators, the exemplar-memory cognitive
//! model with its five reasoning strategies, per-session parameter fitting,
//! machine-learning decision proxies, and the virtual-participant experiment
//! runner with its statistics.

pub mod cognitive;
pub mod data;
pub mod error;
pub mod experiment;
pub mod fitting;
pub mod jsonl;
pub mod label;
pub mod model;
pub mod proxies;
pub mod xai;

pub use error::{Error, Result};
pub use label::Label;
