//! Flat key-value run configuration. Every key mirrors a documented
//! default, so an empty file (or the built-in demo) is a valid config.
//!
//! Format: one `section.key = value` per line, `#` starts a comment.

use crate::error::{Error, Result};
use crate::gumbel::GumbelVariant;
use crate::preprocess::GmmOptions;
use crate::tensor::AdamHyper;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Encoding {
    Gmm,
    MinMax,
}

#[derive(Clone, Debug)]
pub struct DatasetSchema {
    pub path: PathBuf,
    pub label_column: String,
    pub anomaly_value: f64,
    pub drop: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub schema: DatasetSchema,
    pub seed: u64,
    pub output_dir: PathBuf,

    pub encoding: Encoding,
    pub gmm_modes: usize,
    pub gmm_tol: f64,
    pub gmm_max_iter: usize,
    pub gmm_prune_weight: f64,

    pub epochs: usize,
    pub batch_size: usize,
    pub latent_dim: usize,
    pub gen_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
    pub gen_lr: f64,
    pub gen_beta1: f64,
    pub gen_beta2: f64,
    pub disc_lr: f64,
    pub disc_beta1: f64,
    pub disc_beta2: f64,
    pub patience: usize,
    pub smooth_window: usize,
    pub temperature: f64,
    pub variant: GumbelVariant,

    pub invert_steps: usize,
    pub invert_restarts: usize,
    pub invert_lr: f64,
    pub invert_tol: f64,

    pub knn_k: usize,
    /// Fraction of normal rows held out of training for scoring/evaluation.
    pub holdout: f64,

    /// Raw text this config was parsed from; persisted in the model bundle.
    pub source_text: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let gmm = GmmOptions::default();
        let ag = AdamHyper::gan_training();
        let ai = AdamHyper::inversion();
        RunConfig {
            schema: DatasetSchema {
                path: PathBuf::from("data.csv"),
                label_column: "label".into(),
                anomaly_value: 1.0,
                drop: Vec::new(),
            },
            seed: 0,
            output_dir: PathBuf::from("anotab_out"),
            encoding: Encoding::Gmm,
            gmm_modes: gmm.modes,
            gmm_tol: gmm.tol,
            gmm_max_iter: gmm.max_iter,
            gmm_prune_weight: gmm.prune_weight,
            epochs: 300,
            batch_size: 256,
            latent_dim: 64,
            gen_hidden: vec![128, 128],
            disc_hidden: vec![128, 64],
            gen_lr: ag.lr,
            gen_beta1: ag.beta1,
            gen_beta2: ag.beta2,
            disc_lr: ag.lr,
            disc_beta1: ag.beta1,
            disc_beta2: ag.beta2,
            patience: 50,
            smooth_window: 10,
            temperature: 0.2,
            variant: GumbelVariant::Hard,
            invert_steps: 500,
            invert_restarts: 3,
            invert_lr: ai.lr,
            invert_tol: 1e-8,
            knn_k: 5,
            holdout: 0.2,
            source_text: String::new(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        let mut cfg = RunConfig {
            source_text: text.to_string(),
            ..Default::default()
        };

        let mut take = |k: &str| map.remove(k);
        if let Some(v) = take("data.path") {
            cfg.schema.path = PathBuf::from(v);
        }
        if let Some(v) = take("data.label_column") {
            cfg.schema.label_column = v;
        }
        if let Some(v) = take("data.anomaly_value") {
            cfg.schema.anomaly_value = parse_f64("data.anomaly_value", &v)?;
        }
        if let Some(v) = take("data.drop") {
            cfg.schema.drop = split_list(&v);
        }
        if let Some(v) = take("seed") {
            cfg.seed = parse_u64("seed", &v)?;
        }
        if let Some(v) = take("output.dir") {
            cfg.output_dir = PathBuf::from(v);
        }
        if let Some(v) = take("preprocess.encoding") {
            cfg.encoding = match v.as_str() {
                "gmm" => Encoding::Gmm,
                "minmax" => Encoding::MinMax,
                other => {
                    return Err(Error::Config(format!(
                        "preprocess.encoding must be gmm|minmax, got '{other}'"
                    )))
                }
            };
        }
        if let Some(v) = take("preprocess.modes") {
            cfg.gmm_modes = parse_usize("preprocess.modes", &v)?;
        }
        if let Some(v) = take("preprocess.tol") {
            cfg.gmm_tol = parse_f64("preprocess.tol", &v)?;
        }
        if let Some(v) = take("preprocess.max_iter") {
            cfg.gmm_max_iter = parse_usize("preprocess.max_iter", &v)?;
        }
        if let Some(v) = take("preprocess.prune_weight") {
            cfg.gmm_prune_weight = parse_f64("preprocess.prune_weight", &v)?;
        }
        if let Some(v) = take("train.epochs") {
            cfg.epochs = parse_usize("train.epochs", &v)?;
        }
        if let Some(v) = take("train.batch_size") {
            cfg.batch_size = parse_usize("train.batch_size", &v)?;
        }
        if let Some(v) = take("train.latent_dim") {
            cfg.latent_dim = parse_usize("train.latent_dim", &v)?;
        }
        if let Some(v) = take("train.gen_hidden") {
            cfg.gen_hidden = parse_usize_list("train.gen_hidden", &v)?;
        }
        if let Some(v) = take("train.disc_hidden") {
            cfg.disc_hidden = parse_usize_list("train.disc_hidden", &v)?;
        }
        if let Some(v) = take("train.gen_lr") {
            cfg.gen_lr = parse_f64("train.gen_lr", &v)?;
        }
        if let Some(v) = take("train.gen_beta1") {
            cfg.gen_beta1 = parse_f64("train.gen_beta1", &v)?;
        }
        if let Some(v) = take("train.gen_beta2") {
            cfg.gen_beta2 = parse_f64("train.gen_beta2", &v)?;
        }
        if let Some(v) = take("train.disc_lr") {
            cfg.disc_lr = parse_f64("train.disc_lr", &v)?;
        }
        if let Some(v) = take("train.disc_beta1") {
            cfg.disc_beta1 = parse_f64("train.disc_beta1", &v)?;
        }
        if let Some(v) = take("train.disc_beta2") {
            cfg.disc_beta2 = parse_f64("train.disc_beta2", &v)?;
        }
        if let Some(v) = take("train.patience") {
            cfg.patience = parse_usize("train.patience", &v)?;
        }
        if let Some(v) = take("train.smooth_window") {
            cfg.smooth_window = parse_usize("train.smooth_window", &v)?;
        }
        if let Some(v) = take("train.temperature") {
            cfg.temperature = parse_f64("train.temperature", &v)?;
        }
        if let Some(v) = take("train.variant") {
            cfg.variant = match v.as_str() {
                "hard" => GumbelVariant::Hard,
                "soft" => GumbelVariant::SoftNoised,
                other => {
                    return Err(Error::Config(format!(
                        "train.variant must be hard|soft, got '{other}'"
                    )))
                }
            };
        }
        if let Some(v) = take("invert.steps") {
            cfg.invert_steps = parse_usize("invert.steps", &v)?;
        }
        if let Some(v) = take("invert.restarts") {
            cfg.invert_restarts = parse_usize("invert.restarts", &v)?;
        }
        if let Some(v) = take("invert.lr") {
            cfg.invert_lr = parse_f64("invert.lr", &v)?;
        }
        if let Some(v) = take("invert.tol") {
            cfg.invert_tol = parse_f64("invert.tol", &v)?;
        }
        if let Some(v) = take("eval.k") {
            cfg.knn_k = parse_usize("eval.k", &v)?;
        }
        if let Some(v) = take("eval.holdout") {
            cfg.holdout = parse_f64("eval.holdout", &v)?;
        }

        if let Some(unknown) = map.keys().next() {
            return Err(Error::Config(format!("unknown config key '{unknown}'")));
        }
        if !(0.0..1.0).contains(&cfg.holdout) {
            return Err(Error::Config("eval.holdout must be in [0, 1)".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn gmm_options(&self, column_seed: u64) -> GmmOptions {
        GmmOptions {
            modes: self.gmm_modes,
            tol: self.gmm_tol,
            max_iter: self.gmm_max_iter,
            prune_weight: self.gmm_prune_weight,
            seed: column_seed,
        }
    }

    pub fn adam_gen(&self) -> AdamHyper {
        AdamHyper {
            lr: self.gen_lr,
            beta1: self.gen_beta1,
            beta2: self.gen_beta2,
            eps: 1e-8,
        }
    }

    pub fn adam_disc(&self) -> AdamHyper {
        AdamHyper {
            lr: self.disc_lr,
            beta1: self.disc_beta1,
            beta2: self.disc_beta2,
            eps: 1e-8,
        }
    }
}

fn split_list(v: &str) -> Vec<String> {
    v.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: '{v}' is not a number")))
}

fn parse_u64(key: &str, v: &str) -> Result<u64> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: '{v}' is not an unsigned integer")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: '{v}' is not an unsigned integer")))
}

fn parse_usize_list(key: &str, v: &str) -> Result<Vec<usize>> {
    split_list(v)
        .iter()
        .map(|s| parse_usize(key, s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_valid() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.gmm_modes, 10);
        assert_eq!(cfg.encoding, Encoding::Gmm);
    }

    #[test]
    fn round_trips_known_keys() {
        let text = "\
# demo
data.path = foo.csv
data.drop = dow, hod
preprocess.encoding = minmax
train.gen_hidden = 32, 16
seed = 7
";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.schema.path, PathBuf::from("foo.csv"));
        assert_eq!(cfg.schema.drop, vec!["dow", "hod"]);
        assert_eq!(cfg.encoding, Encoding::MinMax);
        assert_eq!(cfg.gen_hidden, vec![32, 16]);
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn unknown_key_is_error() {
        assert!(RunConfig::parse("bogus.key = 1").is_err());
    }

    #[test]
    fn bad_value_is_error() {
        assert!(RunConfig::parse("train.epochs = many").is_err());
    }
}
