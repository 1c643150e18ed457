//! Two-class image directory index with content hashes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::classifier::Label;
use crate::error::{Error, Result};

use super::config::hex;

const IMAGE_EXTENSIONS: [&str; 7] = ["png", "jpg", "jpeg", "bmp", "pgm", "pnm", "ppm"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    /// Path relative to the dataset root.
    pub path: PathBuf,
    pub label: Label,
    /// SHA-256 of the file contents, hex.
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub entries: Vec<DatasetEntry>,
    /// Files that could not be read, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

impl DatasetIndex {
    /// `(positives, negatives)`
    pub fn counts(&self) -> (usize, usize) {
        let p = self
            .entries
            .iter()
            .filter(|e| e.label == Label::Positive)
            .count();
        (p, self.entries.len() - p)
    }

    pub fn full_path(&self, entry: &DatasetEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    /// Hash over the ordered (label, content hash) pairs.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(e.label.to_string().as_bytes());
            h.update(e.hash.as_bytes());
        }
        hex(&h.finalize()[..8])
    }

    /// Tab-separated `label hash path` lines after a `root` line.
    pub fn to_text(&self) -> String {
        let mut s = format!("root\t{}\n", self.root.display());
        for e in &self.entries {
            let _ = writeln!(s, "{}\t{}\t{}", e.label, e.hash, e.path.display());
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
        let mut lines = text.lines();
        let root = lines
            .next()
            .and_then(|l| l.strip_prefix("root\t"))
            .ok_or_else(|| Error::Format("index must start with a root line".into()))?;
        let mut index = DatasetIndex {
            root: PathBuf::from(root),
            entries: Vec::new(),
            skipped: Vec::new(),
        };
        for line in lines {
            let mut f = line.splitn(3, '\t');
            let (Some(kind), Some(mid), Some(path)) = (f.next(), f.next(), f.next()) else {
                return Err(Error::Format(format!("bad index line {line:?}")));
            };
            let label = match kind {
                "positive" => Label::Positive,
                "negative" => Label::Negative,
                "skipped" => {
                    index.skipped.push((PathBuf::from(path), mid.to_string()));
                    continue;
                }
                _ => return Err(Error::Format(format!("bad label {kind:?}"))),
            };
            index.entries.push(DatasetEntry {
                path: PathBuf::from(path),
                label,
                hash: mid.to_string(),
            });
        }
        Ok(index)
    }
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Recursively indexes `root/<positive_dir>` and `root/<negative_dir>`.
///
/// Entries are ordered by path. A missing or empty class directory is a
/// configuration error; unreadable files are skipped and listed.
pub fn ingest(root: &Path, positive_dir: &str, negative_dir: &str) -> Result<DatasetIndex> {
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (dir, label) in [
        (positive_dir, Label::Positive),
        (negative_dir, Label::Negative),
    ] {
        let class_root = root.join(dir);
        if !class_root.is_dir() {
            return Err(Error::Config(format!(
                "class directory {} does not exist",
                class_root.display()
            )));
        }
        let mut found = 0;
        for item in WalkDir::new(&class_root).sort_by_file_name() {
            let item = match item {
                Ok(i) => i,
                Err(e) => {
                    let p = e
                        .path()
                        .map(Path::to_path_buf)
                        .unwrap_or_else(|| class_root.clone());
                    log::warn!("skipping {}: {e}", p.display());
                    skipped.push((p, e.to_string()));
                    continue;
                }
            };
            if !item.file_type().is_file() || !is_image(item.path()) {
                continue;
            }
            let rel = item
                .path()
                .strip_prefix(root)
                .unwrap_or(item.path())
                .to_path_buf();
            match std::fs::read(item.path()) {
                Ok(bytes) => {
                    found += 1;
                    entries.push(DatasetEntry {
                        path: rel,
                        label,
                        hash: hex(&Sha256::digest(&bytes)),
                    });
                }
                Err(e) => {
                    log::warn!("skipping {}: {e}", item.path().display());
                    skipped.push((rel, e.to_string()));
                }
            }
        }
        if found == 0 {
            return Err(Error::Config(format!(
                "class directory {} contains no readable images",
                class_root.display()
            )));
        }
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(DatasetIndex {
        root: root.to_path_buf(),
        entries,
        skipped,
    })
}
