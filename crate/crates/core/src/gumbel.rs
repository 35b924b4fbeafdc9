//! Gumbel-softmax activations: the noised soft variant and the noise-free
//! hard variant whose forward value is discretized to one-hot while the
//! backward pass uses the soft gradient (straight-through estimator).
//!
//! The hard variant applies no Gumbel noise at all, which is what makes
//! repeated forward passes of a trained generator exactly reproducible.

use crate::error::{Error, Result};
use rand::Rng;

const UNIFORM_GUARD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GumbelVariant {
    /// softmax((logits + gumbel noise) / tau)
    SoftNoised,
    /// one-hot(argmax softmax(logits / tau)) with straight-through gradients
    Hard,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GumbelConfig {
    pub temperature: f64,
    pub variant: GumbelVariant,
}

impl Default for GumbelConfig {
    fn default() -> Self {
        GumbelConfig {
            temperature: 0.2,
            variant: GumbelVariant::Hard,
        }
    }
}

/// G_i = -log(-log(U_i)), U_i uniform on (0,1) with endpoints excluded.
pub fn sample_gumbel<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen::<f64>().clamp(UNIFORM_GUARD, 1.0 - UNIFORM_GUARD);
            gumbel_from_uniform(u)
        })
        .collect()
}

pub fn gumbel_from_uniform(u: f64) -> f64 {
    -(-u.ln()).ln()
}

/// softmax(x / tau) with max-subtraction for overflow safety.
pub fn tempered_softmax(logits: &[f64], tau: f64) -> Result<Vec<f64>> {
    if tau <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    if logits.is_empty() {
        return Err(Error::InvalidArgument("softmax of empty logits".into()));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("softmax logits".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| ((l - max) / tau).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Soft variant: softmax((logits + noise) / tau).
pub fn gumbel_softmax(logits: &[f64], config: &GumbelConfig, noise: &[f64]) -> Result<Vec<f64>> {
    if logits.len() != noise.len() {
        return Err(Error::DimensionMismatch(format!(
            "gumbel_softmax: {} logits vs {} noise values",
            logits.len(),
            noise.len()
        )));
    }
    let noised: Vec<f64> = logits.iter().zip(noise).map(|(l, g)| l + g).collect();
    tempered_softmax(&noised, config.temperature)
}

/// One-hot at the argmax, ties broken toward the lowest index.
pub fn one_hot_argmax(values: &[f64]) -> Vec<f64> {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    let mut out = vec![0.0; values.len()];
    out[best] = 1.0;
    out
}

/// Hard variant forward value: one-hot at the argmax of the tempered
/// softmax of the raw logits. No noise is applied. Gradient flow through
/// this activation is handled on the tape (`Tape::hard_one_hot_st`).
pub fn hard_gumbel_softmax(logits: &[f64], config: &GumbelConfig) -> Result<Vec<f64>> {
    let soft = tempered_softmax(logits, config.temperature)?;
    Ok(one_hot_argmax(&soft))
}
