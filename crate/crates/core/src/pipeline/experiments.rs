//! Evaluation, training, per-feature ablation and region masking.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::classifier::metrics::METRIC_NAMES;
use crate::classifier::{kfold_evaluate, train_final, ClassifierModel, Label, MetricsReport};
use crate::envelope::write_atomic;
use crate::error::{Error, Result};
use crate::imaging::{mask_region, GrayImage, Rect};
use crate::riemannian::PgaModel;

use super::config::PipelineConfig;
use super::features::{image_features, model_count, FeatureSet, DIAGRAM_TYPES};

/// Stratified k-fold report on the full feature vectors.
pub fn evaluate(features: &FeatureSet, config: &PipelineConfig) -> Result<MetricsReport> {
    let (x, y) = features.matrix();
    kfold_evaluate(&x, &y, &config.eval_config(), config.seed)
}

/// Cross-validated report plus a final classifier trained on all samples.
pub fn train(
    features: &FeatureSet,
    config: &PipelineConfig,
) -> Result<(MetricsReport, ClassifierModel)> {
    let report = evaluate(features, config)?;
    let (x, y) = features.matrix();
    let (model, search) = train_final(&x, &y, &config.eval_config(), config.seed)?;
    log::info!(
        "final model: C = {:e}, scale = {:e}, {} support vectors",
        search.best.c,
        search.best.scale,
        model.svm.support_vectors.len()
    );
    if !model.svm.converged {
        return Err(Error::NotConverged {
            what: "SMO",
            iterations: 0,
            residual: f64::NAN,
        });
    }
    Ok((report, model))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationReport {
    /// `(diagram type, report)` for H0, H1, H2, LSF.
    pub rows: Vec<(String, MetricsReport)>,
}

impl AblationReport {
    pub fn accuracy(&self, name: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, r)| r.accuracy())
    }

    /// One row per feature type, `mean ± std` for each metric.
    pub fn to_text(&self) -> String {
        let mut s = format!("{:<8}", "feature");
        for m in METRIC_NAMES {
            let _ = write!(s, " {m:>22}");
        }
        s.push('\n');
        for (name, r) in &self.rows {
            let _ = write!(s, "{name:<8}");
            for i in 0..5 {
                let cell = format!("{:.3} ± {:.3}", r.mean[i], r.std[i]);
                let _ = write!(s, " {cell:>22}");
            }
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ablation report serializes")
    }
}

/// One single-type model per diagram type under the same folds and protocol.
pub fn ablate(features: &FeatureSet, config: &PipelineConfig) -> Result<AblationReport> {
    let eval = config.eval_config();
    let rows = (0..4)
        .map(|t| {
            let (x, y) = features.block(t);
            Ok((
                DIAGRAM_TYPES[t].to_string(),
                kfold_evaluate(&x, &y, &eval, config.seed)?,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(AblationReport { rows })
}

/// Everything needed to classify a new image.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub config: PipelineConfig,
    pub pga: Vec<PgaModel>,
    pub classifier: ClassifierModel,
}

const CONFIG_FILE: &str = "pipeline.conf";
const CLASSIFIER_FILE: &str = "classifier.bin";

impl Predictor {
    pub fn predict(&self, img: &GrayImage) -> Result<(Label, f64)> {
        let x = image_features(img, &self.config, &self.pga)?;
        self.classifier.predict(&x)
    }

    /// Writes the resolved config, PGA models and classifier into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join(CONFIG_FILE), self.config.to_text().as_bytes())?;
        for (i, m) in self.pga.iter().enumerate() {
            m.save(&dir.join(format!("pga_{i}.bin")))?;
        }
        self.classifier.save(&dir.join(CLASSIFIER_FILE))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let config = PipelineConfig::load(&dir.join(CONFIG_FILE))?;
        let pga = (0..model_count(config.pga_mode))
            .map(|i| PgaModel::load(&dir.join(format!("pga_{i}.bin"))))
            .collect::<Result<_>>()?;
        let classifier = ClassifierModel::load(&dir.join(CLASSIFIER_FILE))?;
        Ok(Predictor {
            config,
            pga,
            classifier,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaskOutcome {
    pub original: Label,
    pub original_decision: f64,
    pub masked: Label,
    pub masked_decision: f64,
}

impl MaskOutcome {
    pub fn flipped(&self) -> bool {
        self.original != self.masked
    }

    pub fn to_text(&self) -> String {
        format!(
            "original = {}\noriginal_decision = {:.6}\nmasked = {}\nmasked_decision = {:.6}\nflipped = {}\n",
            self.original,
            self.original_decision,
            self.masked,
            self.masked_decision,
            self.flipped()
        )
    }
}

/// Predictions for the image and for a copy with `rect` filled by `fill`.
pub fn mask_experiment(
    predictor: &Predictor,
    img: &GrayImage,
    rect: Rect,
    fill: u8,
) -> Result<MaskOutcome> {
    let masked_img = mask_region(img, rect, fill)?;
    let (original, original_decision) = predictor.predict(img)?;
    let (masked, masked_decision) = if rect.area() == 0 {
        (original, original_decision)
    } else {
        predictor.predict(&masked_img)?
    };
    Ok(MaskOutcome {
        original,
        original_decision,
        masked,
        masked_decision,
    })
}
