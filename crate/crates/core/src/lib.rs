//! Engagement classification from consumer-grade EEG: preprocessing,
//! feature extraction, classifiers, repeated cross-validation, rating
//! statistics and a synthetic data generator.

pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
mod linalg;
pub mod models;
pub mod preprocess;
pub mod signal;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
