//! Content-addressed on-disk cache of per-image persistence diagrams.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::envelope::write_atomic;
use crate::error::{Error, Result};
use crate::persistence::{diagrams_from_text, diagrams_to_text, PersistenceDiagram};

const END_MARKER: &str = "end";

/// The four diagrams of one image: Vietoris–Rips in dimensions
/// `0..=max_hom_dim` and the 0-dimensional lower-star diagram.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDiagrams {
    pub vr: Vec<PersistenceDiagram>,
    pub lsf: PersistenceDiagram,
}

impl ImageDiagrams {
    /// Points in canonical order, so cached and fresh diagrams agree exactly.
    pub fn canonical(self) -> Self {
        ImageDiagrams {
            vr: self.vr.iter().map(PersistenceDiagram::canonical).collect(),
            lsf: self.lsf.canonical(),
        }
    }
}

pub struct DiagramCache {
    dir: PathBuf,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl DiagramCache {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(DiagramCache {
            dir: dir.to_path_buf(),
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        })
    }

    fn paths(&self, content_hash: &str, stage_key: &str) -> (PathBuf, PathBuf) {
        let stem = format!("{content_hash}-{stage_key}");
        (
            self.dir.join(format!("{stem}.vr.pd")),
            self.dir.join(format!("{stem}.lsf.pd")),
        )
    }

    /// Cached diagrams, or `None` on a miss. Unreadable or malformed entries
    /// count as misses and are reported.
    pub fn get(
        &self,
        content_hash: &str,
        stage_key: &str,
        max_hom_dim: usize,
    ) -> Option<ImageDiagrams> {
        let (vr_path, lsf_path) = self.paths(content_hash, stage_key);
        if !vr_path.exists() && !lsf_path.exists() {
            self.misses.fetch_add(1, Ordering::Relaxed);
            return None;
        }
        let read = |p: &Path, max_dim: usize| -> Result<Vec<PersistenceDiagram>> {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let body = text
                .strip_suffix(&format!("{END_MARKER}\n"))
                .ok_or_else(|| Error::Format(format!("{} is incomplete", p.display())))?;
            diagrams_from_text(body, max_dim)
        };
        let loaded = read(&vr_path, max_hom_dim).and_then(|vr| {
            let lsf = read(&lsf_path, 0)?.swap_remove(0);
            Ok(ImageDiagrams { vr, lsf })
        });
        match loaded {
            Ok(d) => {
                self.hits.fetch_add(1, Ordering::Relaxed);
                Some(d)
            }
            Err(e) => {
                log::warn!("corrupt cache entry for {content_hash}, recomputing: {e}");
                self.misses.fetch_add(1, Ordering::Relaxed);
                None
            }
        }
    }

    pub fn put(&self, content_hash: &str, stage_key: &str, diagrams: &ImageDiagrams) -> Result<()> {
        let (vr_path, lsf_path) = self.paths(content_hash, stage_key);
        let vr = format!("{}{END_MARKER}\n", diagrams_to_text(&diagrams.vr));
        let lsf = format!(
            "{}{END_MARKER}\n",
            diagrams_to_text(std::slice::from_ref(&diagrams.lsf))
        );
        write_atomic(&vr_path, vr.as_bytes())?;
        write_atomic(&lsf_path, lsf.as_bytes())
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }
}
