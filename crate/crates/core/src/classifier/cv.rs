//! Stratified k-fold evaluation of the PCA + SVM classifier.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

use super::metrics::{compute_metrics, mean_std, Metrics, METRIC_NAMES};
use super::search::{Candidate, SearchConfig};
use super::{fit_classifier, Label};

/// Fold index per sample. Each class is shuffled separately and dealt
/// round-robin, so every fold gets `⌊n_c/k⌋` or `⌈n_c/k⌉` samples of class `c`.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Argument(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; labels.len()];
    let mut dealt = 0;
    for class in [Label::Positive, Label::Negative] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            folds[i] = dealt % k;
            dealt += 1;
        }
    }
    Ok(folds)
}

/// Independent per-fold seed, so parallel scheduling never changes results.
pub fn fold_seed(master: u64, fold: usize) -> u64 {
    master ^ (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub folds: usize,
    /// Requested PCA dimension before automatic shrinking.
    pub pca_dim: usize,
    pub standardize: bool,
    pub search: SearchConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            pca_dim: 4800,
            standardize: false,
            search: SearchConfig::default(),
        }
    }
}

/// PCA dimension actually used: `min(requested, n − k, feature length)`,
/// with a warning when this lowers the request.
pub fn effective_pca_dim(
    requested: usize,
    samples: usize,
    folds: usize,
    feature_len: usize,
) -> usize {
    let d = requested
        .min(samples.saturating_sub(folds))
        .min(feature_len)
        .max(1);
    if d < requested {
        log::warn!("PCA dimension lowered from {requested} to {d} ({samples} samples, {folds} folds, {feature_len} features)");
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub pca_dim: usize,
    pub selected: Candidate,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    pub mean: [f64; 5],
    pub std: [f64; 5],
}

impl MetricsReport {
    pub fn from_folds(seed: u64, folds: Vec<FoldResult>) -> Self {
        let mut mean = [0.0; 5];
        let mut std = [0.0; 5];
        for m in 0..5 {
            let v: Vec<f64> = folds.iter().map(|f| f.metrics.values()[m]).collect();
            (mean[m], std[m]) = mean_std(&v);
        }
        MetricsReport {
            seed,
            folds,
            mean,
            std,
        }
    }

    pub fn accuracy(&self) -> f64 {
        self.mean[0]
    }

    /// `key = value` lines: per-fold details, then mean and standard deviation.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "folds = {}", self.folds.len());
        for f in &self.folds {
            let p = format!("fold.{}", f.fold);
            let _ = writeln!(s, "{p}.train_size = {}", f.train_size);
            let _ = writeln!(s, "{p}.test_size = {}", f.test_size);
            let _ = writeln!(s, "{p}.pca_dim = {}", f.pca_dim);
            let _ = writeln!(s, "{p}.c = {:e}", f.selected.c);
            let _ = writeln!(s, "{p}.scale = {:e}", f.selected.scale);
            let _ = writeln!(s, "{p}.cv_loss = {:.6}", f.selected.loss);
            let c = f.metrics.confusion;
            let _ = writeln!(
                s,
                "{p}.confusion = tp {} tn {} fp {} fn {}",
                c.tp, c.tn, c.fp, c.fn_
            );
            for (name, v) in METRIC_NAMES.iter().zip(f.metrics.values()) {
                let _ = writeln!(s, "{p}.{name} = {v:.6}");
            }
            let u = f.metrics.undefined;
            if u.any() {
                let names: Vec<&str> = [
                    (u.precision, "precision"),
                    (u.recall, "recall"),
                    (u.specificity, "specificity"),
                    (u.f1, "f1"),
                ]
                .iter()
                .filter(|(flag, _)| *flag)
                .map(|(_, n)| *n)
                .collect();
                let _ = writeln!(s, "{p}.undefined = {}", names.join(","));
            }
        }
        for (i, name) in METRIC_NAMES.iter().enumerate() {
            let _ = writeln!(s, "mean.{name} = {:.6}", self.mean[i]);
            let _ = writeln!(s, "std.{name} = {:.6}", self.std[i]);
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics report serializes")
    }
}

pub(crate) fn check_training_set(x: &[Vec<f64>], y: &[Label], folds: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!(
            "{} feature vectors for {} labels",
            x.len(),
            y.len()
        )));
    }
    let len = x.first().map_or(0, Vec::len);
    if len == 0 || x.iter().any(|r| r.len() != len) {
        return Err(Error::Argument(
            "feature vectors are empty or differ in length".into(),
        ));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Data(
            "feature vectors contain non-finite values".into(),
        ));
    }
    for class in [Label::Positive, Label::Negative] {
        let count = y.iter().filter(|&&l| l == class).count();
        if count < folds.max(1) {
            return Err(Error::Config(format!(
                "class {class} has {count} samples; at least {} required",
                folds.max(1)
            )));
        }
    }
    Ok(())
}

/// Seeded stratified k-fold evaluation. For each fold: standardization (if
/// enabled), PCA, hyperparameter search and SVM training use the training
/// folds only; metrics are computed on the held-out fold.
pub fn kfold_evaluate(
    x: &[Vec<f64>],
    y: &[Label],
    config: &EvalConfig,
    seed: u64,
) -> Result<MetricsReport> {
    check_training_set(x, y, config.folds)?;
    let k = config.folds;
    let assignment = stratified_folds(y, k, seed)?;
    let d = effective_pca_dim(config.pca_dim, x.len(), k, x[0].len());

    let results: Vec<FoldResult> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for i in 0..x.len() {
                if assignment[i] == f {
                    vx.push(x[i].clone());
                    vy.push(y[i]);
                } else {
                    tx.push(x[i].clone());
                    ty.push(y[i]);
                }
            }
            let d_fold = d.min(tx.len());
            let (model, search) = fit_classifier(&tx, &ty, config, d_fold, fold_seed(seed, f))?;
            let predictions = vx
                .iter()
                .map(|v| model.predict(v).map(|(l, _)| l))
                .collect::<Result<Vec<_>>>()?;
            Ok(FoldResult {
                fold: f,
                train_size: tx.len(),
                test_size: vx.len(),
                pca_dim: d_fold,
                selected: search.best,
                metrics: compute_metrics(&predictions, &vy)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(MetricsReport::from_folds(seed, results))
}
