//! Binary classification metrics, reported as percentages.

use serde::Serialize;

use crate::error::{Error, Result};

use super::Label;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(predictions: &[Label], labels: &[Label]) -> Result<Self> {
        if predictions.len() != labels.len() {
            return Err(Error::Argument(format!(
                "{} predictions for {} labels",
                predictions.len(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::Argument("no predictions to score".into()));
        }
        let mut c = Confusion::default();
        for (p, l) in predictions.iter().zip(labels) {
            match (p, l) {
                (Label::Positive, Label::Positive) => c.tp += 1,
                (Label::Negative, Label::Negative) => c.tn += 1,
                (Label::Positive, Label::Negative) => c.fp += 1,
                (Label::Negative, Label::Positive) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Metrics whose denominator was zero; their value is reported as 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Undefined {
    pub precision: bool,
    pub recall: bool,
    pub specificity: bool,
    pub f1: bool,
}

impl Undefined {
    pub fn any(&self) -> bool {
        self.precision || self.recall || self.specificity || self.f1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    pub confusion: Confusion,
    pub undefined: Undefined,
}

pub const METRIC_NAMES: [&str; 5] = ["accuracy", "precision", "recall", "specificity", "f1"];

impl Metrics {
    pub fn from_confusion(c: Confusion) -> Self {
        let mut undefined = Undefined::default();
        let pct = |num: usize, den: usize, flag: &mut bool| {
            if den == 0 {
                *flag = true;
                0.0
            } else {
                100.0 * num as f64 / den as f64
            }
        };
        let accuracy = pct(c.tp + c.tn, c.total(), &mut false);
        let precision = pct(c.tp, c.tp + c.fp, &mut undefined.precision);
        let recall = pct(c.tp, c.tp + c.fn_, &mut undefined.recall);
        let specificity = pct(c.tn, c.tn + c.fp, &mut undefined.specificity);
        let f1 = if precision + recall == 0.0 {
            undefined.f1 = true;
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            accuracy,
            precision,
            recall,
            specificity,
            f1,
            confusion: c,
            undefined,
        }
    }

    /// Values in the order of [`METRIC_NAMES`].
    pub fn values(&self) -> [f64; 5] {
        [
            self.accuracy,
            self.precision,
            self.recall,
            self.specificity,
            self.f1,
        ]
    }
}

pub fn compute_metrics(predictions: &[Label], labels: &[Label]) -> Result<Metrics> {
    Ok(Metrics::from_confusion(Confusion::from_predictions(
        predictions,
        labels,
    )?))
}

/// Mean and sample standard deviation (`n − 1` denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}
