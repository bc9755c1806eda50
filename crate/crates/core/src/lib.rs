//! Consistent-teaching knowledge distillation for audio tagging.
//!
//! - [`logit_store`]: compact on-disk store of top-k teacher outputs.
//! - [`features`]: seed-driven log-Mel and augmentation pipeline.
//! - [`distillation`]: extraction, student training and evaluation.

pub mod distillation;
pub mod error;
pub mod features;
pub mod logit_store;

pub use error::{Error, Result};
