//! Flat `key = value` configuration with stage-scoped hashes.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::classifier::{EvalConfig, SearchBounds, SearchConfig, SearchStrategy};
use crate::error::{Error, Result};
use crate::riemannian::{GridSpec, DEFAULT_VARIANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgaMode {
    /// One model per diagram type.
    Separate,
    /// A single model fitted on the diagrams of all four types.
    Joint,
}

impl FromStr for PgaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "separate" => Ok(PgaMode::Separate),
            "joint" => Ok(PgaMode::Joint),
            _ => Err(Error::Config(format!(
                "pga_mode must be separate or joint, got {s:?}"
            ))),
        }
    }
}

impl PgaMode {
    fn as_str(self) -> &'static str {
        match self {
            PgaMode::Separate => "separate",
            PgaMode::Joint => "joint",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchKind {
    Grid,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub cover_bands: usize,
    pub cover_overlap: u8,
    pub fpc_cap: usize,
    pub vr_threshold: f64,
    pub max_hom_dim: usize,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_step: f64,
    pub gaussian_variance: f64,
    pub pga_k: usize,
    pub pga_mode: PgaMode,
    pub pca_dim: usize,
    pub svm_c_min: f64,
    pub svm_c_max: f64,
    pub svm_scale_min: f64,
    pub svm_scale_max: f64,
    pub search: SearchKind,
    pub search_grid_points: usize,
    pub search_budget: usize,
    pub folds: usize,
    pub seed: u64,
    pub standardize: bool,
    pub positive_dir: String,
    pub negative_dir: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            cover_bands: 32,
            cover_overlap: 0,
            fpc_cap: 600,
            vr_threshold: 500.0,
            max_hom_dim: 2,
            grid_min: 0.0,
            grid_max: 530.0,
            grid_step: 5.0,
            gaussian_variance: DEFAULT_VARIANCE,
            pga_k: 2400,
            pga_mode: PgaMode::Separate,
            pca_dim: 4800,
            svm_c_min: 1e-3,
            svm_c_max: 1e3,
            svm_scale_min: 1e-3,
            svm_scale_max: 1e3,
            search: SearchKind::Grid,
            search_grid_points: 7,
            search_budget: 49,
            folds: 5,
            seed: 0,
            standardize: false,
            positive_dir: "COVID".into(),
            negative_dir: "non-COVID".into(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {key} = {value:?}")))
}

impl PipelineConfig {
    /// Full-resolution grid and the original component counts.
    pub fn paper_fidelity(mut self) -> Self {
        self.grid_step = 0.5;
        self.pga_k = 2400;
        self.pca_dim = 4800;
        self
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            c.set(key, value)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "cover_bands" => self.cover_bands = parse(key, value)?,
            "cover_overlap" => self.cover_overlap = parse(key, value)?,
            "fpc_cap" => self.fpc_cap = parse(key, value)?,
            "vr_threshold" => self.vr_threshold = parse(key, value)?,
            "max_hom_dim" => self.max_hom_dim = parse(key, value)?,
            "grid_min" => self.grid_min = parse(key, value)?,
            "grid_max" => self.grid_max = parse(key, value)?,
            "grid_step" => self.grid_step = parse(key, value)?,
            "gaussian_variance" => self.gaussian_variance = parse(key, value)?,
            "pga_k" => self.pga_k = parse(key, value)?,
            "pga_mode" => self.pga_mode = value.parse()?,
            "pca_dim" => self.pca_dim = parse(key, value)?,
            "svm_c_min" => self.svm_c_min = parse(key, value)?,
            "svm_c_max" => self.svm_c_max = parse(key, value)?,
            "svm_scale_min" => self.svm_scale_min = parse(key, value)?,
            "svm_scale_max" => self.svm_scale_max = parse(key, value)?,
            "search" => {
                self.search = match value {
                    "grid" => SearchKind::Grid,
                    "random" => SearchKind::Random,
                    _ => {
                        return Err(Error::Config(format!(
                            "search must be grid or random, got {value:?}"
                        )))
                    }
                }
            }
            "search_grid_points" => self.search_grid_points = parse(key, value)?,
            "search_budget" => self.search_budget = parse(key, value)?,
            "folds" => self.folds = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "standardize" => self.standardize = parse(key, value)?,
            "positive_dir" => self.positive_dir = value.to_string(),
            "negative_dir" => self.negative_dir = value.to_string(),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive_counts = [
            ("cover_bands", self.cover_bands),
            ("fpc_cap", self.fpc_cap),
            ("pga_k", self.pga_k),
            ("pca_dim", self.pca_dim),
            ("search_grid_points", self.search_grid_points),
            ("search_budget", self.search_budget),
        ];
        for (name, v) in positive_counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.cover_bands > 256 {
            return Err(Error::Config("cover_bands must be at most 256".into()));
        }
        if self.max_hom_dim > 2 {
            return Err(Error::Config("max_hom_dim must be at most 2".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be at least 2".into()));
        }
        let positive_reals = [
            ("vr_threshold", self.vr_threshold),
            ("grid_step", self.grid_step),
            ("gaussian_variance", self.gaussian_variance),
            ("svm_c_min", self.svm_c_min),
            ("svm_c_max", self.svm_c_max),
            ("svm_scale_min", self.svm_scale_min),
            ("svm_scale_max", self.svm_scale_max),
        ];
        for (name, v) in positive_reals {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.svm_c_min > self.svm_c_max || self.svm_scale_min > self.svm_scale_max {
            return Err(Error::Config("search bounds are inverted".into()));
        }
        if self.positive_dir.is_empty()
            || self.negative_dir.is_empty()
            || self.positive_dir == self.negative_dir
        {
            return Err(Error::Config(
                "class directories must be distinct and nonempty".into(),
            ));
        }
        self.grid().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid_min, self.grid_max, self.grid_step)
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            folds: self.folds,
            pca_dim: self.pca_dim,
            standardize: self.standardize,
            search: SearchConfig {
                strategy: match self.search {
                    SearchKind::Grid => SearchStrategy::Grid {
                        points: self.search_grid_points,
                    },
                    SearchKind::Random => SearchStrategy::Random {
                        budget: self.search_budget,
                    },
                },
                bounds: SearchBounds {
                    c_min: self.svm_c_min,
                    c_max: self.svm_c_max,
                    scale_min: self.svm_scale_min,
                    scale_max: self.svm_scale_max,
                },
                inner_folds: self.folds,
            },
        }
    }

    /// Every resolved value as `key = value` lines, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let search = match self.search {
            SearchKind::Grid => "grid",
            SearchKind::Random => "random",
        };
        let pairs: [(&str, String); 24] = [
            ("cover_bands", self.cover_bands.to_string()),
            ("cover_overlap", self.cover_overlap.to_string()),
            ("fpc_cap", self.fpc_cap.to_string()),
            ("vr_threshold", self.vr_threshold.to_string()),
            ("max_hom_dim", self.max_hom_dim.to_string()),
            ("grid_min", self.grid_min.to_string()),
            ("grid_max", self.grid_max.to_string()),
            ("grid_step", self.grid_step.to_string()),
            ("gaussian_variance", self.gaussian_variance.to_string()),
            ("pga_k", self.pga_k.to_string()),
            ("pga_mode", self.pga_mode.as_str().to_string()),
            ("pca_dim", self.pca_dim.to_string()),
            ("svm_c_min", self.svm_c_min.to_string()),
            ("svm_c_max", self.svm_c_max.to_string()),
            ("svm_scale_min", self.svm_scale_min.to_string()),
            ("svm_scale_max", self.svm_scale_max.to_string()),
            ("search", search.to_string()),
            ("search_grid_points", self.search_grid_points.to_string()),
            ("search_budget", self.search_budget.to_string()),
            ("folds", self.folds.to_string()),
            ("seed", self.seed.to_string()),
            ("standardize", self.standardize.to_string()),
            ("positive_dir", self.positive_dir.clone()),
            ("negative_dir", self.negative_dir.clone()),
        ];
        for (k, v) in pairs {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Key of the diagram stage: depends only on settings that change the
    /// persistence diagrams of an image.
    pub fn diagram_stage_key(&self) -> String {
        short_hash(&format!(
            "diagrams v1|bands={}|overlap={}|cap={}|threshold={}|max_dim={}",
            self.cover_bands, self.cover_overlap, self.fpc_cap, self.vr_threshold, self.max_hom_dim
        ))
    }

    /// Key of the embedding + PGA stage, chained on the diagram stage.
    pub fn riemannian_stage_key(&self) -> String {
        short_hash(&format!(
            "riemannian v1|{}|grid={},{},{}|variance={}|k={}|mode={}",
            self.diagram_stage_key(),
            self.grid_min,
            self.grid_max,
            self.grid_step,
            self.gaussian_variance,
            self.pga_k,
            self.pga_mode.as_str()
        ))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// First 16 hex digits of the SHA-256 of `s`.
pub(crate) fn short_hash(s: &str) -> String {
    hex(&Sha256::digest(s.as_bytes())[..8])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_fidelity() {
        let c = PipelineConfig::default();
        assert_eq!(c.grid_step, 5.0);
        let f = c.clone().paper_fidelity();
        let text = f.to_text();
        for line in [
            "gaussian_variance = 0.2",
            "grid_min = 0",
            "grid_max = 530",
            "grid_step = 0.5",
            "vr_threshold = 500",
            "pga_k = 2400",
            "pca_dim = 4800",
            "folds = 5",
            "svm_c_min = 0.001",
            "svm_c_max = 1000",
            "svm_scale_min = 0.001",
            "svm_scale_max = 1000",
        ] {
            assert!(text.lines().any(|l| l == line), "missing {line}");
        }
        assert_eq!(PipelineConfig::from_text(&text).unwrap(), f);
    }

    #[test]
    fn parsing_and_errors() {
        let c = PipelineConfig::from_text(
            "# comment\npga_k = 64\n\npca_dim=128 # trailing\npga_mode = joint\n",
        )
        .unwrap();
        assert_eq!((c.pga_k, c.pca_dim, c.pga_mode), (64, 128, PgaMode::Joint));
        assert!(matches!(
            PipelineConfig::from_text("bogus = 1"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            PipelineConfig::from_text("folds = 1"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            PipelineConfig::from_text("grid_step = 7"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            PipelineConfig::from_text("pga_k"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            PipelineConfig::from_text("gaussian_variance = -1"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn stage_keys() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.grid_step = 10.0;
        assert_eq!(a.diagram_stage_key(), b.diagram_stage_key());
        assert_ne!(a.riemannian_stage_key(), b.riemannian_stage_key());
        let mut c = a.clone();
        c.vr_threshold = 400.0;
        assert_ne!(a.diagram_stage_key(), c.diagram_stage_key());
        assert_ne!(a.riemannian_stage_key(), c.riemannian_stage_key());
        let mut d = a.clone();
        d.pca_dim = 10;
        assert_eq!(a.riemannian_stage_key(), d.riemannian_stage_key());
    }
}
