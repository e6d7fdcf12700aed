//! Core library for detecting, measuring, and explaining collective affect
//! shifts in timestamped text corpora.
//!
//! The crate is organised around the pipeline stages it supports:
//!
//! * [`ingest`] — corpus parsing, text preprocessing, day bucketing
//! * [`affect`] — the fixed 21-category affect scheme and label vectors
//! * [`label`] — lexicon and vector-similarity document labelers
//! * [`series`] — daily fraction time series and gap imputation
//! * [`changepoint`] — CUSUM and Bayesian online change-point detectors
//! * [`reaction`] — interrupted time-series regression and baseline contrasts
//! * [`topic`] — clustering-based topic extraction around change points
//! * [`eval`] — event grouping and corpus-level evaluation metrics
//!
//! Everything here is deterministic: all randomness flows from caller-supplied
//! seeds and no function reads ambient state.

pub mod affect;
pub mod changepoint;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod label;
pub mod reaction;
pub mod series;
pub mod stats;
pub mod topic;

pub use error::{Error, Result};

/// Crate version, recorded in pipeline run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
