//! Latent inversion scoring: per-row gradient descent on the generator
//! input minimizing reconstruction MSE, with restarts. The final MSE is the
//! anomaly score; per-feature differences explain what the generator could
//! not reproduce.

use crate::error::{Error, Result};
use crate::gan::{self, GanModel};
use crate::preprocess::{decode_row, ColumnNormalizer};
use crate::tensor::{mse_value, AdamHyper, AdamState, Tape, Vector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Clone, Debug)]
pub struct InversionConfig {
    pub steps: usize,
    pub restarts: usize,
    pub adam: AdamHyper,
    /// Stop a restart once the loss improvement falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            steps: 500,
            restarts: 3,
            adam: AdamHyper::inversion(),
            tol: 1e-8,
            seed: 0,
        }
    }
}

/// Outcome of scoring one row.
#[derive(Clone, Debug)]
pub struct AnomalyReport {
    /// Final reconstruction MSE in encoded space.
    pub score: f64,
    pub latent: Vector,
    /// |G(z*)_j - x_j| per encoded slot.
    pub encoded_abs_diff: Vec<f64>,
    /// Squared encoded differences; they sum to score * width.
    pub encoded_sq_diff: Vec<f64>,
    /// |decoded(G(z*))_c - decoded(x)_c| per original feature, data units.
    pub feature_abs_diff: Vec<f64>,
    pub flagged: bool,
}

fn loss_at(z: &Vector, x: &Vector, model: &GanModel) -> Result<f64> {
    let out = gan::generator_forward(z, model)?;
    Ok(mse_value(out.as_slice(), x.as_slice()))
}

/// One seeded optimization run: Adam on MSE(G(z), x), gradients flowing
/// through the straight-through estimator. Returns the best-so-far z, its
/// loss, and the best-so-far loss trajectory (non-increasing).
fn run_restart(
    x: &Vector,
    model: &GanModel,
    config: &InversionConfig,
    seed: u64,
) -> Result<(Vector, f64, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = gan::sample_latent(model.latent_dim, &mut rng);
    let mut adam = AdamState::new(config.adam, &[model.latent_dim]);

    let mut best_z = z.clone();
    let mut best_loss = loss_at(&z, x, model)?;
    if !best_loss.is_finite() {
        return Err(Error::NonFinite("initial inversion loss".into()));
    }
    let mut trajectory = vec![best_loss];
    let mut prev_loss = best_loss;

    for step in 0..config.steps {
        let mut tape = Tape::new();
        let zn = tape.param(z.clone());
        let out = gan::generator_tape_for_inversion(&mut tape, model, zn)?;
        let target = tape.constant(x.clone());
        let loss_node = tape.mse(out, target)?;
        let loss = tape.scalar(loss_node)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite("inversion loss".into()));
        }
        if loss < best_loss {
            best_loss = loss;
            best_z = z.clone();
        }
        trajectory.push(best_loss);

        let grads = tape.backward(loss_node)?;
        let g = grads.node(zn).as_slice().to_vec();
        adam.step(&mut [z.as_mut_slice()], &[&g])?;

        // `loss` is evaluated before the update, so on step 0 it equals the
        // initial loss; only compare once an update has happened.
        if step > 0 && (prev_loss - loss).abs() < config.tol {
            break;
        }
        prev_loss = loss;
    }

    // the last update may have improved things
    let final_loss = loss_at(&z, x, model)?;
    if final_loss < best_loss {
        best_loss = final_loss;
        best_z = z;
        trajectory.push(best_loss);
    }

    Ok((best_z, best_loss, trajectory))
}

/// Best-of-restarts latent inversion. Restarts that diverge are dropped;
/// it is an error only if every restart fails.
pub fn invert_latent(
    x: &Vector,
    model: &GanModel,
    config: &InversionConfig,
) -> Result<(Vector, Vec<f64>)> {
    if config.steps < 1 || config.restarts < 1 {
        return Err(Error::InvalidArgument(
            "inversion needs at least 1 step and 1 restart".into(),
        ));
    }
    if x.len() != model.layout.width() {
        return Err(Error::DimensionMismatch(format!(
            "row width {} does not match layout width {}",
            x.len(),
            model.layout.width()
        )));
    }
    let mut best: Option<(Vector, f64, Vec<f64>)> = None;
    let mut last_err = None;
    for r in 0..config.restarts {
        match run_restart(x, model, config, config.seed.wrapping_add(r as u64)) {
            Ok((z, loss, traj)) => {
                if best.as_ref().map_or(true, |(_, b, _)| loss < *b) {
                    best = Some((z, loss, traj));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((z, _, traj)) => Ok((z, traj)),
        None => Err(last_err.unwrap_or_else(|| {
            Error::InvalidArgument("no inversion restart produced a result".into())
        })),
    }
}

/// Score one row: reconstruction MSE plus per-feature attributions in
/// encoded space and, when normalizers are supplied, in data units.
pub fn anomaly_score(
    x: &Vector,
    model: &GanModel,
    normalizers: Option<&[ColumnNormalizer]>,
    config: &InversionConfig,
    threshold: Option<f64>,
) -> Result<AnomalyReport> {
    let (z, _) = invert_latent(x, model, config)?;
    let recon = gan::generator_forward(&z, model)?;
    let score = mse_value(recon.as_slice(), x.as_slice());
    let encoded_abs_diff: Vec<f64> = recon
        .as_slice()
        .iter()
        .zip(x.as_slice())
        .map(|(a, b)| (a - b).abs())
        .collect();
    let encoded_sq_diff: Vec<f64> = encoded_abs_diff.iter().map(|d| d * d).collect();
    let feature_abs_diff = match normalizers {
        Some(nz) => {
            let dx = decode_row(x.as_slice(), nz, true)?;
            let dr = decode_row(recon.as_slice(), nz, true)?;
            dx.iter().zip(&dr).map(|(a, b)| (a - b).abs()).collect()
        }
        None => Vec::new(),
    };
    Ok(AnomalyReport {
        score,
        latent: z,
        encoded_abs_diff,
        encoded_sq_diff,
        feature_abs_diff,
        flagged: threshold.map_or(false, |t| score >= t),
    })
}

/// Score many rows in parallel. The per-row seed is derived from the base
/// seed and the row index, so results are independent of execution order.
pub fn score_batch(
    rows: &[Vector],
    model: &GanModel,
    normalizers: Option<&[ColumnNormalizer]>,
    config: &InversionConfig,
    threshold: Option<f64>,
) -> Result<Vec<AnomalyReport>> {
    rows.par_iter()
        .enumerate()
        .map(|(i, row)| {
            let cfg = InversionConfig {
                seed: config
                    .seed
                    .wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
                ..config.clone()
            };
            anomaly_score(row, model, normalizers, &cfg, threshold)
        })
        .collect()
}
