//! ROC/AUC analysis, Youden-threshold selection, thresholded metrics, and
//! the brute-force kNN-distance baseline.

use crate::error::{Error, Result};
use crate::tensor::Vector;

/// Scores paired with binary labels (1 = anomaly).
#[derive(Clone, Debug)]
pub struct LabeledScores {
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
}

impl LabeledScores {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} scores vs {} labels",
                scores.len(),
                labels.len()
            )));
        }
        Ok(LabeledScores { scores, labels })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// Points ordered by ascending threshold; classification rule is
/// score >= threshold. The infinite-threshold point pins (FPR, TPR) = (0, 0)
/// and the lowest threshold yields (1, 1).
#[derive(Clone, Debug)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub optimal_threshold: f64,
}

pub fn roc_curve(scores: &LabeledScores) -> Result<RocCurve> {
    let n_pos = scores.labels.iter().filter(|l| **l).count();
    let n_neg = scores.labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument(
            "ROC needs both classes present".into(),
        ));
    }
    if scores.scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("ROC scores".into()));
    }

    let mut pairs: Vec<(f64, bool)> = scores
        .scores
        .iter()
        .cloned()
        .zip(scores.labels.iter().cloned())
        .collect();
    // descending by score; thresholds sweep from +inf downward
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        tpr: 0.0,
        fpr: 0.0,
    }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < pairs.len() {
        let t = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == t {
            if pairs[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: t,
            tpr: tp as f64 / n_pos as f64,
            fpr: fp as f64 / n_neg as f64,
        });
    }
    points.reverse(); // ascending threshold

    // trapezoid over (fpr, tpr) with fpr ascending
    let mut auc = 0.0;
    let mut sweep: Vec<&RocPoint> = points.iter().collect();
    sweep.sort_by(|a, b| a.fpr.total_cmp(&b.fpr).then(a.tpr.total_cmp(&b.tpr)));
    for w in sweep.windows(2) {
        auc += (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0;
    }

    let optimal_threshold = youden_threshold(&points);
    Ok(RocCurve {
        points,
        auc,
        optimal_threshold,
    })
}

/// Threshold maximizing Youden's J = TPR - FPR, ties broken toward the
/// higher threshold (fewer false alarms).
fn youden_threshold(points: &[RocPoint]) -> f64 {
    let mut best = points[points.len() - 1];
    let mut best_j = best.tpr - best.fpr;
    for p in points.iter().rev().skip(1) {
        let j = p.tpr - p.fpr;
        if j > best_j {
            best_j = j;
            best = *p;
        }
    }
    best.threshold
}

pub fn optimal_threshold(curve: &RocCurve) -> f64 {
    youden_threshold(&curve.points)
}

/// Accuracy/precision/recall/F1 at a fixed threshold (score >= t = anomaly).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdMetrics {
    pub threshold: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

pub fn threshold_metrics(scores: &LabeledScores, threshold: f64) -> ThresholdMetrics {
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (s, l) in scores.scores.iter().zip(&scores.labels) {
        match (*s >= threshold, *l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let total = (tp + fp + tn + fn_) as f64;
    let precision = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall = if tp + fn_ > 0 {
        tp as f64 / (tp + fn_) as f64
    } else {
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    ThresholdMetrics {
        threshold,
        accuracy: (tp + tn) as f64 / total,
        precision,
        recall,
        f1,
        tp,
        fp,
        tn,
        fn_,
    }
}

/// score(x) = Euclidean distance to the k-th nearest training row.
/// Brute-force exact search.
pub fn knn_anomaly_scores(train: &[Vector], test: &[Vector], k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > train.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {} invalid for training size {}",
            k,
            train.len()
        )));
    }
    let width = train[0].len();
    for r in train.iter().chain(test.iter()) {
        if r.len() != width {
            return Err(Error::DimensionMismatch(
                "kNN rows must share width".into(),
            ));
        }
    }
    Ok(test
        .iter()
        .map(|t| {
            let mut d2: Vec<f64> = train
                .iter()
                .map(|r| {
                    t.as_slice()
                        .iter()
                        .zip(r.as_slice())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                })
                .collect();
            let (_, kth, _) = d2.select_nth_unstable_by(k - 1, f64::total_cmp);
            kth.sqrt()
        })
        .collect())
}
