//! Pool-based active-learning simulation harness.
//!
//! The crate is organised around the pieces of a round-based labeling
//! experiment:
//!
//! - [`dataset`]: examples, token sentences, SVMlight ingestion, splits, the
//!   synthetic segmentation corpus, and the label-revision / expiration events.
//! - [`models`]: SGD logistic regression, random-Fourier-feature kernel
//!   logistic regression, an averaged-perceptron token tagger, and best-of-k
//!   training.
//! - [`sampling`]: margin scores, batch selection and the power-law ensemble
//!   scorer.
//! - [`experiment`]: the seeded multi-trial loop with its event schedule.
//! - [`metrics`]: evaluation, confidence bands, sampling gains and variance
//!   diagnostics.

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod models;
pub mod sampling;
pub mod seed;

pub use error::{Error, Result};
