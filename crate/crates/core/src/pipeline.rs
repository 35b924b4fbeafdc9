//! End-to-end orchestration: preprocess -> split -> train -> score ->
//! evaluate -> report. Every stage is deterministic given (input files,
//! config, seed); any stage error aborts with the stage name and removes
//! partial outputs.

use crate::bundle::{self, ModelBundle};
use crate::config::{Encoding, RunConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{self, LabeledScores, RocCurve, ThresholdMetrics};
use crate::gan::{self, ColumnLayout, OutputLayout, TrainConfig};
use crate::inversion::{self, AnomalyReport, InversionConfig};
use crate::io;
use crate::preprocess::{
    self, encode_row, ColumnNormalizer, MinMaxParams,
};
use crate::tensor::Vector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

/// Prepared splits: normal-only training rows (encoded) plus the labeled
/// scoring set (held-out normals and every anomaly).
pub struct Prepared {
    pub feature_names: Vec<String>,
    pub normalizers: Vec<ColumnNormalizer>,
    pub layout: OutputLayout,
    pub train_encoded: Vec<Vector>,
    pub test_encoded: Vec<Vector>,
    pub test_labels: Vec<bool>,
    /// Raw (unencoded) feature rows, min-max scaled, for the kNN baseline.
    pub knn_train: Vec<Vector>,
    pub knn_test: Vec<Vector>,
    /// Rows fed to training; tests assert no anomalous row is ever counted.
    pub rows_trained: usize,
    pub degenerate_columns: Vec<String>,
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name.to_string(),
        source: Box::new(e),
    })
}

fn feature_rows(ds: &Dataset, label_idx: usize) -> Vec<Vec<f64>> {
    ds.rows()
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .filter(|(i, _)| *i != label_idx)
                .map(|(_, v)| *v)
                .collect()
        })
        .collect()
}

pub fn fit_normalizers(
    columns: &[Vec<f64>],
    cfg: &RunConfig,
) -> Result<(Vec<ColumnNormalizer>, Vec<usize>)> {
    let mut normalizers = Vec::new();
    let mut degenerate = Vec::new();
    for (ci, col) in columns.iter().enumerate() {
        match cfg.encoding {
            Encoding::MinMax => {
                let p = MinMaxParams::fit(col)?;
                if p.is_degenerate() {
                    degenerate.push(ci);
                }
                normalizers.push(ColumnNormalizer::MinMax(p));
            }
            Encoding::Gmm => {
                let mut distinct = col.clone();
                distinct.sort_by(f64::total_cmp);
                distinct.dedup();
                if distinct.len() == 1 {
                    // flatlined sensor; mode-specific normalization is
                    // meaningless, fall back to the degenerate min-max map
                    let p = MinMaxParams::fit(col)?;
                    degenerate.push(ci);
                    normalizers.push(ColumnNormalizer::MinMax(p));
                    continue;
                }
                let modes = cfg.gmm_modes.min(distinct.len()).min(col.len());
                let opts = cfg.gmm_options(cfg.seed.wrapping_add(ci as u64));
                let opts = preprocess::GmmOptions { modes, ..opts };
                let (model, _) = preprocess::fit_gmm_em(col, &opts)?;
                normalizers.push(ColumnNormalizer::Gmm(model));
            }
        }
    }
    Ok((normalizers, degenerate))
}

/// Load, drop, split, hold out, fit normalizers on training normals only,
/// and encode both splits.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let raw = stage("load", io::load_csv(&cfg.schema.path))?;
    let dropped = stage(
        "preprocess",
        preprocess::drop_columns(&raw, &cfg.schema.drop),
    )?;
    let (normal, anomalous) = stage(
        "split",
        preprocess::split_by_label(&dropped, &cfg.schema.label_column, cfg.schema.anomaly_value),
    )?;
    if normal.n_rows() == 0 {
        return Err(Error::Stage {
            stage: "split".into(),
            source: Box::new(Error::InvalidArgument("no normal rows to train on".into())),
        });
    }

    let label_idx = dropped.column_index(&cfg.schema.label_column)?;
    let feature_names: Vec<String> = dropped
        .columns()
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, n)| n.clone())
        .collect();

    let normal_features = feature_rows(&normal, label_idx);
    let anomaly_features = feature_rows(&anomalous, label_idx);

    // seeded holdout of normal rows for scoring
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x484F_4C44);
    let mut idx: Vec<usize> = (0..normal_features.len()).collect();
    for i in (1..idx.len()).rev() {
        idx.swap(i, rng.gen_range(0..=i));
    }
    let n_holdout = (normal_features.len() as f64 * cfg.holdout).floor() as usize;
    let (test_idx, train_idx) = idx.split_at(n_holdout);

    let train_rows: Vec<&Vec<f64>> = train_idx.iter().map(|&i| &normal_features[i]).collect();
    let test_normal_rows: Vec<&Vec<f64>> = test_idx.iter().map(|&i| &normal_features[i]).collect();

    let n_features = feature_names.len();
    let columns: Vec<Vec<f64>> = (0..n_features)
        .map(|c| train_rows.iter().map(|r| r[c]).collect())
        .collect();
    let (normalizers, degenerate_idx) = stage("fit", fit_normalizers(&columns, cfg))?;
    let degenerate_columns: Vec<String> = degenerate_idx
        .iter()
        .map(|&i| feature_names[i].clone())
        .collect();

    let layout = OutputLayout {
        columns: normalizers
            .iter()
            .map(|nz| ColumnLayout {
                mode_count: nz.mode_count(),
            })
            .collect(),
    };

    let encode_all = |rows: &[&Vec<f64>]| -> Result<Vec<Vector>> {
        rows.iter()
            .map(|r| encode_row(r, &normalizers).map(Vector::new))
            .collect()
    };
    let train_encoded = stage("encode", encode_all(&train_rows))?;
    let mut test_rows: Vec<&Vec<f64>> = test_normal_rows.clone();
    test_rows.extend(anomaly_features.iter());
    let test_encoded = stage("encode", encode_all(&test_rows))?;
    let mut test_labels = vec![false; test_normal_rows.len()];
    test_labels.extend(std::iter::repeat(true).take(anomaly_features.len()));

    // kNN operates in the min-max-scaled space so features are commensurate
    let mm: Vec<MinMaxParams> = columns
        .iter()
        .map(|c| MinMaxParams::fit(c))
        .collect::<Result<_>>()?;
    let scale = |rows: &[&Vec<f64>]| -> Vec<Vector> {
        rows.iter()
            .map(|r| {
                Vector::new(
                    r.iter()
                        .zip(&mm)
                        .map(|(x, p)| p.transform(*x))
                        .collect(),
                )
            })
            .collect()
    };
    let knn_train = scale(&train_rows);
    let knn_test = scale(&test_rows);

    Ok(Prepared {
        feature_names,
        normalizers,
        layout,
        rows_trained: train_encoded.len(),
        train_encoded,
        test_encoded,
        test_labels,
        knn_train,
        knn_test,
        degenerate_columns,
    })
}

pub fn train_config(cfg: &RunConfig) -> TrainConfig {
    TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        latent_dim: cfg.latent_dim,
        gen_hidden: cfg.gen_hidden.clone(),
        disc_hidden: cfg.disc_hidden.clone(),
        adam_gen: cfg.adam_gen(),
        adam_disc: cfg.adam_disc(),
        patience: cfg.patience,
        smooth_window: cfg.smooth_window,
        temperature: cfg.temperature,
        variant: cfg.variant,
        seed: cfg.seed,
    }
}

pub fn inversion_config(cfg: &RunConfig) -> InversionConfig {
    InversionConfig {
        steps: cfg.invert_steps,
        restarts: cfg.invert_restarts,
        adam: crate::tensor::AdamHyper {
            lr: cfg.invert_lr,
            ..crate::tensor::AdamHyper::inversion()
        },
        tol: cfg.invert_tol,
        seed: cfg.seed ^ 0x494E_5645,
    }
}

pub struct PipelineReport {
    pub auc: f64,
    pub knn_auc: f64,
    pub threshold: f64,
    pub metrics: ThresholdMetrics,
    pub rows_trained: usize,
    pub stop_epoch: usize,
    pub artifacts: Vec<PathBuf>,
}

struct ArtifactGuard {
    written: Vec<PathBuf>,
    keep: bool,
}

impl ArtifactGuard {
    fn new() -> Self {
        ArtifactGuard {
            written: Vec::new(),
            keep: false,
        }
    }

    fn track(&mut self, p: PathBuf) -> PathBuf {
        self.written.push(p.clone());
        p
    }
}

impl Drop for ArtifactGuard {
    fn drop(&mut self) {
        if !self.keep {
            for p in &self.written {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

pub fn write_scores_csv(
    path: &Path,
    reports: &[AnomalyReport],
    labels: &[bool],
    feature_names: &[String],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["row_id".to_string(), "label".into(), "score".into(), "flagged".into()];
    header.extend(feature_names.iter().map(|n| format!("attr_{n}")));
    w.write_record(&header)?;
    for (i, (r, l)) in reports.iter().zip(labels).enumerate() {
        let mut rec = vec![
            i.to_string(),
            if *l { "1".to_string() } else { "0".to_string() },
            io::format_float(r.score),
            if r.flagged { "1".to_string() } else { "0".to_string() },
        ];
        rec.extend(r.feature_abs_diff.iter().map(|v| io::format_float(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_roc_csv(path: &Path, curve: &RocCurve) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["threshold", "tpr", "fpr"])?;
    for p in &curve.points {
        w.write_record([
            io::format_float(p.threshold),
            io::format_float(p.tpr),
            io::format_float(p.fpr),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_loss_csv(path: &Path, history: &gan::LossHistory) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "gen_loss", "disc_loss"])?;
    for (i, (g, d)) in history
        .generator
        .iter()
        .zip(&history.discriminator)
        .enumerate()
    {
        w.write_record([
            (i + 1).to_string(),
            io::format_float(*g),
            io::format_float(*d),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_metrics(
    path: &Path,
    report: &PipelineReport,
) -> Result<()> {
    let m = &report.metrics;
    let text = format!(
        "auc = {}\nknn_auc = {}\nthreshold = {}\naccuracy = {}\nprecision = {}\nrecall = {}\nf1 = {}\ntp = {}\nfp = {}\ntn = {}\nfn = {}\nrows_trained = {}\nstop_epoch = {}\n",
        io::format_float(report.auc),
        io::format_float(report.knn_auc),
        io::format_float(report.threshold),
        io::format_float(m.accuracy),
        io::format_float(m.precision),
        io::format_float(m.recall),
        io::format_float(m.f1),
        m.tp,
        m.fp,
        m.tn,
        m.fn_,
        report.rows_trained,
        report.stop_epoch,
    );
    std::fs::write(path, text)?;
    Ok(())
}

/// Full run: emits scores.csv, roc.csv, loss.csv, metrics.txt and model.bin
/// into the config's output directory.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineReport> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut guard = ArtifactGuard::new();

    let prepared = prepare(cfg)?;
    for name in &prepared.degenerate_columns {
        eprintln!("warning: column '{name}' is constant; mapped to 0");
    }

    let (model, history) = stage(
        "train",
        gan::train_gan(&prepared.train_encoded, &prepared.layout, &train_config(cfg)),
    )?;

    let inv_cfg = inversion_config(cfg);
    let mut reports = stage(
        "score",
        inversion::score_batch(
            &prepared.test_encoded,
            &model,
            Some(&prepared.normalizers),
            &inv_cfg,
            None,
        ),
    )?;

    let scores: Vec<f64> = reports.iter().map(|r| r.score).collect();
    let labeled = stage(
        "evaluate",
        LabeledScores::new(scores.clone(), prepared.test_labels.clone()),
    )?;
    let curve = stage("evaluate", eval::roc_curve(&labeled))?;
    let threshold = curve.optimal_threshold;
    for r in &mut reports {
        r.flagged = r.score >= threshold;
    }
    let metrics = eval::threshold_metrics(&labeled, threshold);

    let knn_scores = stage(
        "evaluate",
        eval::knn_anomaly_scores(
            &prepared.knn_train,
            &prepared.knn_test,
            cfg.knn_k.min(prepared.knn_train.len()),
        ),
    )?;
    let knn_labeled = LabeledScores::new(knn_scores, prepared.test_labels.clone())?;
    let knn_auc = eval::roc_curve(&knn_labeled)?.auc;

    let mut report = PipelineReport {
        auc: curve.auc,
        knn_auc,
        threshold,
        metrics,
        rows_trained: prepared.rows_trained,
        stop_epoch: history.stop_epoch,
        artifacts: Vec::new(),
    };

    let scores_path = guard.track(cfg.output_dir.join("scores.csv"));
    stage(
        "report",
        write_scores_csv(
            &scores_path,
            &reports,
            &prepared.test_labels,
            &prepared.feature_names,
        ),
    )?;
    let roc_path = guard.track(cfg.output_dir.join("roc.csv"));
    stage("report", write_roc_csv(&roc_path, &curve))?;
    let loss_path = guard.track(cfg.output_dir.join("loss.csv"));
    stage("report", write_loss_csv(&loss_path, &history))?;
    let metrics_path = guard.track(cfg.output_dir.join("metrics.txt"));
    stage("report", write_metrics(&metrics_path, &report))?;

    let bundle = ModelBundle {
        config_text: cfg.source_text.clone(),
        feature_columns: prepared.feature_names.clone(),
        normalizers: prepared.normalizers.clone(),
        model,
        history,
    };
    let model_path = guard.track(cfg.output_dir.join("model.bin"));
    stage("report", bundle::save_model(&bundle, &model_path))?;

    guard.keep = true;
    report.artifacts = guard.written.clone();
    Ok(report)
}
