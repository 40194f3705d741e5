//! Oversampling of imbalanced tabular datasets with a conditional WGAN-GP,
//! SMOTE-family baselines, a classifier benchmark harness, and the
//! accompanying statistical comparison machinery.

pub mod error;
pub mod seed;
pub mod tape;

pub use error::{Error, Result};
