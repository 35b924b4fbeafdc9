//! Deterministic synthetic benchmark generator.
//!
//! Each feature is a two-component Gaussian mixture with deliberately
//! heterogeneous scales: a tight cluster and a much wider one. Anomalous
//! rows take one feature drawn from the tight cluster and push it 6-10
//! tight-cluster sigmas away, on the side facing away from the wide
//! cluster. The absolute offset is small next to the wide cluster's
//! spread, so plain Euclidean neighbor distances barely react, while the
//! per-mode normalization exposes it.

use crate::data::Dataset;
use crate::error::Result;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Clone, Debug)]
pub struct SynthSpec {
    pub n_normal: usize,
    pub n_anomalous: usize,
    pub n_features: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_normal: 5000,
            n_anomalous: 250,
            n_features: 4,
            seed: 0,
        }
    }
}

struct FeatureModes {
    tight_mean: f64,
    tight_sd: f64,
    wide_mean: f64,
    wide_sd: f64,
    tight_prob: f64,
}

fn feature_modes(i: usize) -> FeatureModes {
    // shift centers a little per feature so columns are not identical
    let base = i as f64 * 0.5;
    FeatureModes {
        tight_mean: base,
        tight_sd: 0.05,
        wide_mean: base + 4.0,
        wide_sd: 1.0,
        tight_prob: 0.5,
    }
}

fn normal_feature(modes: &FeatureModes, rng: &mut ChaCha8Rng) -> f64 {
    if rng.gen::<f64>() < modes.tight_prob {
        Normal::new(modes.tight_mean, modes.tight_sd)
            .unwrap()
            .sample(rng)
    } else {
        Normal::new(modes.wide_mean, modes.wide_sd)
            .unwrap()
            .sample(rng)
    }
}

/// Rows have `n_features` feature columns plus a trailing "label" column
/// (1 = anomaly). Fully determined by the spec (including its seed).
pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut columns: Vec<String> = (0..spec.n_features).map(|i| format!("f{i}")).collect();
    columns.push("label".into());

    let mut rows = Vec::with_capacity(spec.n_normal + spec.n_anomalous);
    for _ in 0..spec.n_normal {
        let mut row: Vec<f64> = (0..spec.n_features)
            .map(|i| normal_feature(&feature_modes(i), &mut rng))
            .collect();
        row.push(0.0);
        rows.push(row);
    }
    for _ in 0..spec.n_anomalous {
        let mut row: Vec<f64> = (0..spec.n_features)
            .map(|i| normal_feature(&feature_modes(i), &mut rng))
            .collect();
        // plant the anomaly in one feature: start from the tight mode and
        // step 6-10 of its sigmas away from the wide cluster
        let j = rng.gen_range(0..spec.n_features);
        let m = feature_modes(j);
        let base = Normal::new(m.tight_mean, m.tight_sd).unwrap().sample(&mut rng);
        let sigmas = rng.gen_range(6.0..10.0);
        row[j] = base - sigmas * m.tight_sd;
        row.push(1.0);
        rows.push(row);
    }
    Dataset::new(columns, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_equal_seed() {
        let spec = SynthSpec {
            n_normal: 50,
            n_anomalous: 5,
            ..Default::default()
        };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }

    #[test]
    fn counts_and_labels() {
        let spec = SynthSpec {
            n_normal: 40,
            n_anomalous: 7,
            n_features: 3,
            seed: 1,
        };
        let d = generate(&spec).unwrap();
        assert_eq!(d.n_rows(), 47);
        assert_eq!(d.n_cols(), 4);
        let li = d.column_index("label").unwrap();
        let anomalies = d.rows().iter().filter(|r| r[li] == 1.0).count();
        assert_eq!(anomalies, 7);
    }
}
