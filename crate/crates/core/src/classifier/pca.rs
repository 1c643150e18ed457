//! Principal component analysis and optional per-feature standardization.

use crate::envelope::{EnvelopeReader, EnvelopeWriter};
use crate::error::{Error, Result};
use crate::linalg::{dot, principal_directions};

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Orthonormal components by decreasing variance.
    pub components: Vec<Vec<f64>>,
    /// Sample variance along each component.
    pub variances: Vec<f64>,
}

/// Fits the top `d` principal components of the centred rows, via the Gram
/// matrix. Requires `d ≤ min(sample count, feature length)`.
pub fn pca_fit(rows: &[Vec<f64>], d: usize) -> Result<PcaModel> {
    let n = rows.len();
    let len = rows.first().map_or(0, Vec::len);
    if n == 0 || len == 0 {
        return Err(Error::Argument(
            "PCA needs a nonempty feature matrix".into(),
        ));
    }
    if d == 0 || d > n.min(len) {
        return Err(Error::Argument(format!(
            "PCA dimension {d} must be in 1..={} for {n} samples of length {len}",
            n.min(len)
        )));
    }
    if rows.iter().any(|r| r.len() != len) {
        return Err(Error::Argument("feature vectors differ in length".into()));
    }
    let mut mean = vec![0.0; len];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centred: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let p = principal_directions(&centred, d, &[])?;
    let denom = (n.max(2) - 1) as f64;
    Ok(PcaModel {
        mean,
        components: p.directions,
        variances: p.eigenvalues.iter().map(|l| l / denom).collect(),
    })
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::Argument(format!(
                "feature length {} does not match PCA input length {}",
                x.len(),
                self.mean.len()
            )));
        }
        let c: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok(self.components.iter().map(|e| dot(e, &c)).collect())
    }

    pub fn inverse_transform(&self, z: &[f64]) -> Vec<f64> {
        let mut x = self.mean.clone();
        for (c, e) in z.iter().zip(&self.components) {
            crate::linalg::axpy(*c, e, &mut x);
        }
        x
    }

    pub(crate) fn write(&self, w: &mut EnvelopeWriter) {
        w.f64s(&self.mean).u64(self.components.len() as u64);
        for c in &self.components {
            w.f64s(c);
        }
        w.f64s(&self.variances);
    }

    pub(crate) fn read(r: &mut EnvelopeReader) -> Result<Self> {
        let mean = r.f64s()?;
        let d = r.usize()?;
        let components: Vec<Vec<f64>> = (0..d).map(|_| r.f64s()).collect::<Result<_>>()?;
        let variances = r.f64s()?;
        if components.iter().any(|c| c.len() != mean.len()) || variances.len() != d {
            return Err(Error::Format(
                "PCA block dimensions are inconsistent".into(),
            ));
        }
        Ok(PcaModel {
            mean,
            components,
            variances,
        })
    }
}

/// Per-feature centring and scaling to unit variance; constant features are
/// only centred.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let len = rows.first().map_or(0, Vec::len);
        if n == 0 {
            return Err(Error::Argument("cannot standardize an empty set".into()));
        }
        let mut mean = vec![0.0; len];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x / n as f64;
            }
        }
        let mut var = vec![0.0; len];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m) / n as f64;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| if v > 0.0 { v.sqrt() } else { 1.0 })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    pub(crate) fn write(&self, w: &mut EnvelopeWriter) {
        w.f64s(&self.mean).f64s(&self.scale);
    }

    pub(crate) fn read(r: &mut EnvelopeReader) -> Result<Self> {
        let mean = r.f64s()?;
        let scale = r.f64s()?;
        if mean.len() != scale.len() {
            return Err(Error::Format(
                "standardizer dimensions are inconsistent".into(),
            ));
        }
        Ok(Standardizer { mean, scale })
    }
}
