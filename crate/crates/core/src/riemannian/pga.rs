//! Principal geodesic analysis in the tangent space at the Karcher mean.

use std::path::Path;

use rayon::prelude::*;

use crate::envelope::{EnvelopeKind, EnvelopeReader, EnvelopeWriter};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, principal_directions};

use super::{karcher_mean, sphere_distance, sphere_exp, sphere_log, GridSpec, SpherePoint};

/// How sphere points were produced; stored with the model so a loaded model
/// can embed new diagrams consistently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingSettings {
    pub grid: GridSpec,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgaModel {
    pub embedding: Option<EmbeddingSettings>,
    /// Karcher mean of the fitted points.
    pub base: SpherePoint,
    /// Orthonormal tangent vectors at `base`, by decreasing variance.
    pub basis: Vec<Vec<f64>>,
    /// Tangent variance along each basis vector.
    pub variances: Vec<f64>,
    /// Total tangent variance of the fitted points.
    pub total_variance: f64,
    /// Whether the Karcher iteration met its tolerance.
    pub mean_converged: bool,
    /// Norm of the last Karcher update step.
    pub mean_residual: f64,
}

impl PgaModel {
    pub fn k(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.base.dim()
    }

    /// Fraction of the total tangent variance captured by each component.
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        if self.total_variance <= 0.0 {
            return vec![0.0; self.k()];
        }
        self.variances
            .iter()
            .map(|v| v / self.total_variance)
            .collect()
    }

    /// `exp(base, Σ c_i e_i)` using the first `coords.len()` basis vectors.
    pub fn reconstruct(&self, coords: &[f64]) -> Result<SpherePoint> {
        if coords.len() > self.k() {
            return Err(Error::Argument(format!(
                "{} coordinates for a {}-component model",
                coords.len(),
                self.k()
            )));
        }
        let mut tangent = vec![0.0; self.ambient_dim()];
        for (c, e) in coords.iter().zip(&self.basis) {
            axpy(*c, e, &mut tangent);
        }
        sphere_exp(&self.base, &tangent)
    }

    /// Geodesic distance from `point` to its reconstruction from the first
    /// `k` coordinates.
    pub fn reconstruction_error(&self, point: &SpherePoint, k: usize) -> Result<f64> {
        let coords = pga_project(self, point)?;
        let approx = self.reconstruct(&coords[..k.min(coords.len())])?;
        sphere_distance(point, &approx)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = EnvelopeWriter::new(EnvelopeKind::Pga);
        match self.embedding {
            Some(e) => w
                .u64(1)
                .f64(e.grid.min)
                .f64(e.grid.max)
                .f64(e.grid.step)
                .f64(e.variance),
            None => w.u64(0),
        };
        w.u64(self.k() as u64).u64(self.ambient_dim() as u64);
        w.f64s(self.base.coords());
        for b in &self.basis {
            w.f64s(b);
        }
        w.f64s(&self.variances)
            .f64(self.total_variance)
            .u64(self.mean_converged as u64)
            .f64(self.mean_residual);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = EnvelopeReader::new(bytes, EnvelopeKind::Pga)?;
        let embedding = match r.u64()? {
            0 => None,
            1 => {
                let (min, max, step) = (r.f64()?, r.f64()?, r.f64()?);
                Some(EmbeddingSettings {
                    grid: GridSpec::new(min, max, step)?,
                    variance: r.f64()?,
                })
            }
            t => return Err(Error::Format(format!("bad embedding tag {t}"))),
        };
        let k = r.usize()?;
        let ambient = r.usize()?;
        let base = SpherePoint::new(r.f64s()?)?;
        let basis: Vec<Vec<f64>> = (0..k).map(|_| r.f64s()).collect::<Result<_>>()?;
        let variances = r.f64s()?;
        let total_variance = r.f64()?;
        let mean_converged = r.u64()? != 0;
        let mean_residual = r.f64()?;
        r.finish()?;
        if base.dim() != ambient || basis.iter().any(|b| b.len() != ambient) || variances.len() != k
        {
            return Err(Error::Format(
                "PGA model dimensions are inconsistent".into(),
            ));
        }
        Ok(PgaModel {
            embedding,
            base,
            basis,
            variances,
            total_variance,
            mean_converged,
            mean_residual,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::envelope::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Fits `k` principal geodesic directions to the points.
///
/// Tangent vectors `log(mean, p_i)` are collected at the Karcher mean and the
/// leading eigenvectors of their second-moment matrix are obtained from the
/// `N × N` Gram matrix. Requires `k ≤ N − 1` and `k < ambient dimension`.
pub fn pga_fit(points: &[SpherePoint], k: usize) -> Result<PgaModel> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Argument(format!(
            "PGA needs at least 2 points, got {n}"
        )));
    }
    let ambient = points[0].dim();
    if k == 0 || k > n - 1 || k >= ambient {
        return Err(Error::Argument(format!(
            "k = {k} must be in 1..={} for {n} points in dimension {ambient}",
            (n - 1).min(ambient.saturating_sub(1))
        )));
    }
    let karcher = karcher_mean(points)?;
    if !karcher.converged {
        log::warn!(
            "Karcher mean stopped after {} iterations (step {:e})",
            karcher.iterations,
            karcher.residual
        );
    }
    let base = karcher.mean;
    let tangents: Vec<Vec<f64>> = points
        .par_iter()
        .map(|p| sphere_log(&base, p))
        .collect::<Result<_>>()?;
    let principal = principal_directions(&tangents, k, &[base.coords()])?;
    let inv = 1.0 / n as f64;
    Ok(PgaModel {
        embedding: None,
        base,
        basis: principal.directions,
        variances: principal.eigenvalues.iter().map(|l| l * inv).collect(),
        total_variance: principal.trace * inv,
        mean_converged: karcher.converged,
        mean_residual: karcher.residual,
    })
}

/// Coordinates of `log(base, point)` in the model's basis.
pub fn pga_project(model: &PgaModel, point: &SpherePoint) -> Result<Vec<f64>> {
    let t = sphere_log(&model.base, point)?;
    Ok(model.basis.iter().map(|e| dot(&t, e)).collect())
}
