//! GAN-based anomaly detection for tabular data.
//!
//! Trains a CTGAN-style generator on normal-only rows (mode-specific GMM
//! normalization, hard Gumbel-softmax output heads), scores unseen rows by
//! gradient-based latent inversion, and evaluates with ROC/AUC, optimal
//! thresholding, per-feature attribution, and a kNN-distance baseline.

pub mod bundle;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod gan;
pub mod gumbel;
pub mod inversion;
pub mod io;
pub mod pipeline;
pub mod preprocess;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
