//! PCA + RBF-SVM classification of concatenated topological features.

pub mod cv;
pub mod metrics;
pub mod pca;
pub mod search;
pub mod svm;

use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::envelope::{write_atomic, EnvelopeKind, EnvelopeReader, EnvelopeWriter};
use crate::error::{Error, Result};

pub use cv::{kfold_evaluate, stratified_folds, EvalConfig, MetricsReport};
pub use metrics::{compute_metrics, Metrics};
pub use pca::{pca_fit, PcaModel, Standardizer};
pub use search::{hyperparam_search, SearchBounds, SearchConfig, SearchStrategy};
pub use svm::{svm_train, SvmModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub(crate) fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
        })
    }
}

/// Joins the per-diagram coordinates in the fixed order H0, H1, H2, LSF.
pub fn concat_features(h0: &[f64], h1: &[f64], h2: &[f64], lsf: &[f64]) -> Result<Vec<f64>> {
    let k = h0.len();
    if h1.len() != k || h2.len() != k || lsf.len() != k {
        return Err(Error::Argument(format!(
            "feature blocks differ in length ({}, {}, {}, {})",
            k,
            h1.len(),
            h2.len(),
            lsf.len()
        )));
    }
    Ok([h0, h1, h2, lsf].concat())
}

/// Everything needed to classify a raw feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub standardizer: Option<Standardizer>,
    pub pca: PcaModel,
    pub svm: SvmModel,
}

impl ClassifierModel {
    fn reduce(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.standardizer {
            Some(s) => self.pca.transform(&s.apply(x)),
            None => self.pca.transform(x),
        }
    }

    /// Predicted label and SVM decision value.
    pub fn predict(&self, x: &[f64]) -> Result<(Label, f64)> {
        let z = self.reduce(x)?;
        let f = self.svm.decision(&z);
        let label = if f > 0.0 {
            Label::Positive
        } else {
            Label::Negative
        };
        Ok((label, f))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = EnvelopeWriter::new(EnvelopeKind::Classifier);
        match &self.standardizer {
            Some(s) => {
                w.u64(1);
                s.write(&mut w);
            }
            None => {
                w.u64(0);
            }
        }
        self.pca.write(&mut w);
        self.svm.write(&mut w);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = EnvelopeReader::new(bytes, EnvelopeKind::Classifier)?;
        let standardizer = match r.u64()? {
            0 => None,
            1 => Some(Standardizer::read(&mut r)?),
            t => return Err(Error::Format(format!("bad standardizer tag {t}"))),
        };
        let pca = PcaModel::read(&mut r)?;
        let svm = SvmModel::read(&mut r)?;
        r.finish()?;
        if svm.support_vectors.iter().any(|v| v.len() != pca.dim()) {
            return Err(Error::Format(
                "support vectors do not match the PCA dimension".into(),
            ));
        }
        Ok(ClassifierModel {
            standardizer,
            pca,
            svm,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Standardize (optional), fit PCA to `pca_dim`, search hyperparameters on the
/// reduced data and train the final SVM, all on the given samples.
pub fn fit_classifier(
    x: &[Vec<f64>],
    y: &[Label],
    config: &EvalConfig,
    pca_dim: usize,
    seed: u64,
) -> Result<(ClassifierModel, search::SearchResult)> {
    let standardizer = if config.standardize {
        Some(Standardizer::fit(x)?)
    } else {
        None
    };
    let scaled: Vec<Vec<f64>>;
    let input = match &standardizer {
        Some(s) => {
            scaled = x.iter().map(|r| s.apply(r)).collect();
            &scaled
        }
        None => x,
    };
    let pca = pca_fit(input, pca_dim)?;
    let z: Vec<Vec<f64>> = input
        .iter()
        .map(|r| pca.transform(r))
        .collect::<Result<_>>()?;
    let found = hyperparam_search(&z, y, &config.search, seed)?;
    let svm = svm_train(&z, y, found.best.c, found.best.scale)?;
    Ok((
        ClassifierModel {
            standardizer,
            pca,
            svm,
        },
        found,
    ))
}

/// Final model on all samples, with the PCA dimension shrunk as in
/// cross-validation.
pub fn train_final(
    x: &[Vec<f64>],
    y: &[Label],
    config: &EvalConfig,
    seed: u64,
) -> Result<(ClassifierModel, search::SearchResult)> {
    cv::check_training_set(x, y, config.folds)?;
    let d = cv::effective_pca_dim(config.pca_dim, x.len(), config.folds, x[0].len());
    fit_classifier(x, y, config, d.min(x.len()), seed)
}
