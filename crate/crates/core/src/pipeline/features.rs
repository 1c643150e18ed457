//! Per-image diagrams, sphere embedding and PGA coordinates.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::classifier::{concat_features, Label};
use crate::envelope::write_atomic;
use crate::error::{Error, Result};
use crate::imaging::{build_fpc_capped, load_grayscale, GrayImage};
use crate::persistence::{lsf_zero_diagram, vr_persistence, PersistenceDiagram};
use crate::riemannian::pga::EmbeddingSettings;
use crate::riemannian::{
    pd_to_density, pga_fit, pga_project, sqrt_embed, PgaModel, SpherePoint, KARCHER_MAX_ITERATIONS,
};

use super::cache::{DiagramCache, ImageDiagrams};
use super::config::{PgaMode, PipelineConfig};
use super::dataset::DatasetIndex;

/// Diagram types in feature order.
pub const DIAGRAM_TYPES: [&str; 4] = ["h0", "h1", "h2", "lsf"];

/// Rips diagrams in dimensions 0..=2 (dimensions above `max_hom_dim` stay
/// empty) and the lower-star diagram, in canonical point order.
pub fn compute_diagrams(img: &GrayImage, config: &PipelineConfig) -> Result<ImageDiagrams> {
    let (fpc, bands) = build_fpc_capped(
        img,
        config.cover_bands,
        config.cover_overlap,
        config.fpc_cap,
    )?;
    if bands != config.cover_bands {
        log::debug!(
            "feature point cloud capped: {} bands, {} points",
            bands,
            fpc.len()
        );
    }
    let mut vr = vr_persistence(&fpc.points(), config.max_hom_dim, config.vr_threshold)?;
    while vr.len() < 3 {
        vr.push(PersistenceDiagram::empty(vr.len()));
    }
    Ok(ImageDiagrams {
        vr,
        lsf: lsf_zero_diagram(img),
    }
    .canonical())
}

impl ImageDiagrams {
    /// Diagram of type `t` in [`DIAGRAM_TYPES`] order.
    pub fn of_type(&self, t: usize) -> &PersistenceDiagram {
        if t < 3 {
            &self.vr[t]
        } else {
            &self.lsf
        }
    }
}

fn embed(pd: &PersistenceDiagram, settings: &EmbeddingSettings) -> Result<SpherePoint> {
    sqrt_embed(&pd_to_density(pd, &settings.grid, settings.variance)?)
}

fn settings(config: &PipelineConfig) -> Result<EmbeddingSettings> {
    Ok(EmbeddingSettings {
        grid: config.grid()?,
        variance: config.gaussian_variance,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub path: PathBuf,
    pub label: Label,
    pub hash: String,
    /// Concatenated H0, H1, H2, LSF coordinates, `k` each.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub k: usize,
    pub rows: Vec<FeatureRow>,
    /// Images that could not be decoded, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

impl FeatureSet {
    pub fn matrix(&self) -> (Vec<Vec<f64>>, Vec<Label>) {
        self.rows
            .iter()
            .map(|r| (r.values.clone(), r.label))
            .unzip()
    }

    /// Columns of diagram type `t` only.
    pub fn block(&self, t: usize) -> (Vec<Vec<f64>>, Vec<Label>) {
        let k = self.k;
        self.rows
            .iter()
            .map(|r| (r.values[t * k..(t + 1) * k].to_vec(), r.label))
            .unzip()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("k\t{}\n", self.k);
        for r in &self.rows {
            let _ = write!(s, "{}\t{}\t{}\t", r.label, r.hash, r.path.display());
            for (i, v) in r.values.iter().enumerate() {
                if i > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{v}");
            }
            s.push('\n');
        }
        for (p, why) in &self.skipped {
            let _ = writeln!(
                s,
                "skipped\t{}\t{}",
                why.replace(['\t', '\n'], " "),
                p.display()
            );
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |l: &str| {
            Error::Format(format!(
                "bad feature line {:?}",
                l.chars().take(80).collect::<String>()
            ))
        };
        let mut lines = text.lines();
        let first = lines.next().unwrap_or("");
        let k: usize = first
            .strip_prefix("k\t")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(first))?;
        let mut set = FeatureSet {
            k,
            rows: Vec::new(),
            skipped: Vec::new(),
        };
        for line in lines {
            let mut f = line.splitn(4, '\t');
            let (Some(kind), Some(hash), Some(path)) = (f.next(), f.next(), f.next()) else {
                return Err(bad(line));
            };
            let label = match kind {
                "positive" => Label::Positive,
                "negative" => Label::Negative,
                "skipped" => {
                    set.skipped.push((PathBuf::from(path), hash.to_string()));
                    continue;
                }
                _ => return Err(bad(line)),
            };
            let values: Vec<f64> = f
                .next()
                .ok_or_else(|| bad(line))?
                .split(' ')
                .map(|v| v.parse::<f64>().map_err(|_| bad(line)))
                .collect::<Result<_>>()?;
            if values.len() != 4 * k {
                return Err(bad(line));
            }
            set.rows.push(FeatureRow {
                path: PathBuf::from(path),
                label,
                hash: hash.to_string(),
                values,
            });
        }
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Outcome of the feature stage.
#[derive(Debug, Clone)]
pub struct FeatureRun {
    pub features: FeatureSet,
    /// One model per diagram type, or a single shared model in joint mode.
    pub models: Vec<PgaModel>,
    pub diagram_hits: usize,
    pub diagram_misses: usize,
    /// Whether embedding + PGA results came from the cache.
    pub riemannian_cached: bool,
    /// Directory holding the stage outputs (features and PGA models).
    pub stage_dir: PathBuf,
}

fn model_file(mode: PgaMode, t: usize) -> String {
    match mode {
        PgaMode::Separate => format!("pga_{}.bin", DIAGRAM_TYPES[t]),
        PgaMode::Joint => "pga_joint.bin".into(),
    }
}

pub fn model_count(mode: PgaMode) -> usize {
    match mode {
        PgaMode::Separate => 4,
        PgaMode::Joint => 1,
    }
}

/// Diagrams for every indexed image (cached by content hash and diagram-stage
/// key), then sphere embedding and PGA (cached by riemannian-stage key and
/// dataset fingerprint).
pub fn run_features(
    index: &DatasetIndex,
    config: &PipelineConfig,
    cache_dir: &Path,
) -> Result<FeatureRun> {
    config.validate()?;
    let cache = DiagramCache::new(&cache_dir.join("diagrams"))?;
    let key = config.diagram_stage_key();

    let outcomes: Vec<std::result::Result<ImageDiagrams, String>> = index
        .entries
        .par_iter()
        .map(|entry| {
            if let Some(d) = cache.get(&entry.hash, &key, config.max_hom_dim) {
                return Ok(Ok(d));
            }
            let img = match load_grayscale(index.full_path(entry)) {
                Ok(img) => img,
                Err(e @ (Error::Format(_) | Error::Io { .. })) => {
                    log::warn!("skipping {}: {e}", entry.path.display());
                    return Ok(Err(e.to_string()));
                }
                Err(e) => return Err(e),
            };
            let d = compute_diagrams(&img, config)?;
            cache.put(&entry.hash, &key, &d)?;
            Ok(Ok(d))
        })
        .collect::<Result<_>>()?;
    log::info!(
        "diagram cache: {} hits, {} misses",
        cache.hits(),
        cache.misses()
    );

    let mut kept = DatasetIndex {
        root: index.root.clone(),
        entries: Vec::new(),
        skipped: index.skipped.clone(),
    };
    let mut diagrams = Vec::new();
    for (entry, outcome) in index.entries.iter().zip(outcomes) {
        match outcome {
            Ok(d) => {
                kept.entries.push(entry.clone());
                diagrams.push(d);
            }
            Err(why) => kept.skipped.push((entry.path.clone(), why)),
        }
    }
    let (p, n) = kept.counts();
    if p == 0 || n == 0 {
        return Err(Error::Data(format!(
            "a class has no usable images ({p} positive, {n} negative)"
        )));
    }

    let stage_dir = cache_dir.join("riemannian").join(format!(
        "{}-{}",
        config.riemannian_stage_key(),
        kept.fingerprint()
    ));
    let features_path = stage_dir.join("features.tsv");
    let count = model_count(config.pga_mode);

    let cached = (|| -> Result<(FeatureSet, Vec<PgaModel>)> {
        let features = FeatureSet::load(&features_path)?;
        let models = (0..count)
            .map(|t| PgaModel::load(&stage_dir.join(model_file(config.pga_mode, t))))
            .collect::<Result<Vec<_>>>()?;
        Ok((features, models))
    })();
    let (mut features, models, riemannian_cached) = match cached {
        Ok((f, m)) if f.rows.len() == kept.entries.len() => (f, m, true),
        other => {
            if features_path.exists() {
                if let Err(e) = other {
                    log::warn!("riemannian cache unusable, recomputing: {e}");
                }
            }
            let (features, models) = fit_riemannian(&kept, &diagrams, config)?;
            for (t, m) in models.iter().enumerate() {
                m.save(&stage_dir.join(model_file(config.pga_mode, t)))?;
            }
            features.save(&features_path)?;
            (features, models, false)
        }
    };
    features.skipped = kept.skipped.clone();

    Ok(FeatureRun {
        features,
        models,
        diagram_hits: cache.hits(),
        diagram_misses: cache.misses(),
        riemannian_cached,
        stage_dir,
    })
}

fn check_converged(m: &PgaModel) -> Result<()> {
    if m.mean_converged {
        Ok(())
    } else {
        Err(Error::NotConverged {
            what: "Karcher mean",
            iterations: KARCHER_MAX_ITERATIONS,
            residual: m.mean_residual,
        })
    }
}

fn effective_k(requested: usize, points: usize, ambient: usize) -> usize {
    let k = requested.min(points - 1).min(ambient - 1);
    if k < requested {
        log::warn!("PGA dimension lowered from {requested} to {k} ({points} points)");
    }
    k
}

fn fit_riemannian(
    index: &DatasetIndex,
    diagrams: &[ImageDiagrams],
    config: &PipelineConfig,
) -> Result<(FeatureSet, Vec<PgaModel>)> {
    let s = settings(config)?;
    let n = diagrams.len();
    let ambient = s.grid.len();
    let mut blocks: Vec<Vec<Vec<f64>>> = vec![Vec::new(); 4];
    let mut models = Vec::new();

    match config.pga_mode {
        PgaMode::Separate => {
            let k = effective_k(config.pga_k, n, ambient);
            for (t, block) in blocks.iter_mut().enumerate() {
                let points: Vec<SpherePoint> = diagrams
                    .par_iter()
                    .map(|d| embed(d.of_type(t), &s))
                    .collect::<Result<_>>()?;
                let mut model = pga_fit(&points, k)?;
                check_converged(&model)?;
                model.embedding = Some(s);
                *block = points
                    .par_iter()
                    .map(|p| pga_project(&model, p))
                    .collect::<Result<_>>()?;
                models.push(model);
            }
        }
        PgaMode::Joint => {
            let k = effective_k(config.pga_k, 4 * n, ambient);
            let points: Vec<SpherePoint> = (0..4)
                .flat_map(|t| diagrams.iter().map(move |d| (t, d)))
                .collect::<Vec<_>>()
                .par_iter()
                .map(|(t, d)| embed(d.of_type(*t), &s))
                .collect::<Result<_>>()?;
            let mut model = pga_fit(&points, k)?;
            check_converged(&model)?;
            model.embedding = Some(s);
            for (t, block) in blocks.iter_mut().enumerate() {
                *block = points[t * n..(t + 1) * n]
                    .par_iter()
                    .map(|p| pga_project(&model, p))
                    .collect::<Result<_>>()?;
            }
            models.push(model);
        }
    }

    let k = blocks[0].first().map_or(0, Vec::len);
    let rows = index
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            Ok(FeatureRow {
                path: e.path.clone(),
                label: e.label,
                hash: e.hash.clone(),
                values: concat_features(
                    &blocks[0][i],
                    &blocks[1][i],
                    &blocks[2][i],
                    &blocks[3][i],
                )?,
            })
        })
        .collect::<Result<_>>()?;
    Ok((
        FeatureSet {
            k,
            rows,
            skipped: Vec::new(),
        },
        models,
    ))
}

/// Feature vector of a single image under fitted PGA models.
pub fn image_features(
    img: &GrayImage,
    config: &PipelineConfig,
    models: &[PgaModel],
) -> Result<Vec<f64>> {
    if models.len() != 4 && models.len() != 1 {
        return Err(Error::Argument(format!(
            "expected 1 or 4 PGA models, got {}",
            models.len()
        )));
    }
    let d = compute_diagrams(img, config)?;
    let mut blocks = Vec::with_capacity(4);
    for t in 0..4 {
        let model = &models[t.min(models.len() - 1)];
        let s = match model.embedding {
            Some(s) => s,
            None => settings(config)?,
        };
        blocks.push(pga_project(model, &embed(d.of_type(t), &s)?)?);
    }
    concat_features(&blocks[0], &blocks[1], &blocks[2], &blocks[3])
}
