//! Persistence diagrams over GF(2).
//!
//! * [`compute_persistence`]: boundary-matrix column reduction with clearing on
//!   any explicit [`FilteredComplex`], dimension 0 by union-find.
//! * [`rips`]: implicit Vietoris–Rips persistent cohomology for feature point
//!   clouds, never materializing the complex.
//! * [`lsf_zero_diagram`]: the 0-dimensional lower-star diagram of an image.
//! * [`oracle`]: slow rank-based reference used to check the engines.

mod lower_star;
pub mod oracle;
pub mod rips;
mod union_find;

use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::filtration::FilteredComplex;

pub use lower_star::lsf_zero_diagram;
pub use oracle::oracle_persistence;
pub use rips::vr_persistence;
pub(crate) use union_find::UnionFind;

/// A (birth, death) pair; essential classes have `death == f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdPoint {
    pub birth: f64,
    pub death: f64,
}

impl PdPoint {
    pub fn new(birth: f64, death: f64) -> Self {
        Self { birth, death }
    }

    pub fn essential(birth: f64) -> Self {
        Self {
            birth,
            death: f64::INFINITY,
        }
    }

    pub fn is_essential(&self) -> bool {
        self.death == f64::INFINITY
    }

    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }

    fn cmp_total(&self, other: &Self) -> Ordering {
        self.birth
            .total_cmp(&other.birth)
            .then(self.death.total_cmp(&other.death))
    }
}

/// Persistence diagram of a single homological dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PersistenceDiagram {
    pub dim: usize,
    pub points: Vec<PdPoint>,
}

impl PersistenceDiagram {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            points: Vec::new(),
        }
    }

    /// Adds `(birth, death)` unless it has zero persistence.
    pub fn push(&mut self, birth: f64, death: f64) {
        debug_assert!(death >= birth, "death {death} < birth {birth}");
        if death > birth {
            self.points.push(PdPoint { birth, death });
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points sorted by (birth, death); two diagrams are equal as multisets
    /// iff their canonical forms are equal.
    pub fn canonical(&self) -> Self {
        let mut points = self.points.clone();
        points.sort_by(PdPoint::cmp_total);
        Self {
            dim: self.dim,
            points,
        }
    }

    pub fn same_multiset(&self, other: &Self) -> bool {
        self.dim == other.dim && self.canonical().points == other.canonical().points
    }

    pub fn essential_count(&self) -> usize {
        self.points.iter().filter(|p| p.is_essential()).count()
    }
}

/// Betti numbers indexed by dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BettiProfile {
    pub betti: Vec<usize>,
}

impl BettiProfile {
    pub fn euler_characteristic(&self) -> i64 {
        self.betti
            .iter()
            .enumerate()
            .map(|(m, &b)| if m % 2 == 0 { b as i64 } else { -(b as i64) })
            .sum()
    }
}

/// Persistence diagrams of dimensions `0..=max_hom_dim` of a sorted complex.
///
/// Columns are reduced from the top dimension down; a simplex that is the pivot
/// of a reduced column of dimension `q + 1` has a zero column and is skipped in
/// dimension `q` (clearing). Dimension 0 is handled by a union-find sweep with
/// the elder rule. Zero-persistence pairs are dropped.
pub fn compute_persistence(
    complex: &FilteredComplex,
    max_hom_dim: usize,
) -> Result<Vec<PersistenceDiagram>> {
    let facets = complex.facet_positions()?;
    let simplices = &complex.simplices;
    let n = simplices.len();
    let mut diagrams: Vec<PersistenceDiagram> =
        (0..=max_hom_dim).map(PersistenceDiagram::empty).collect();

    // cleared[i]: simplex i is the pivot of some reduced column, i.e. its class
    // was killed and it has already been paired.
    let mut cleared = vec![false; n];
    let top = complex.max_dim().unwrap_or(0);

    for q in (2..=(max_hom_dim + 1).min(top)).rev() {
        let mut owner: Vec<u32> = vec![u32::MAX; n];
        let mut reduced: Vec<Vec<u32>> = Vec::new();
        for j in (0..n).filter(|&j| simplices[j].dim() == q) {
            if cleared[j] {
                continue;
            }
            let mut col = facets[j].clone();
            while let Some(&low) = col.last() {
                match owner[low as usize] {
                    u32::MAX => break,
                    k => col = xor_sorted(&col, &reduced[k as usize]),
                }
            }
            match col.last() {
                None => {
                    if q <= max_hom_dim {
                        diagrams[q].push(simplices[j].value, f64::INFINITY);
                    }
                }
                Some(&low) => {
                    let low = low as usize;
                    cleared[low] = true;
                    diagrams[q - 1].push(simplices[low].value, simplices[j].value);
                    owner[low] = reduced.len() as u32;
                    reduced.push(col);
                }
            }
        }
    }

    // Dimension 0 by union-find; a non-merging edge is a 1-cycle creator.
    let mut uf = UnionFind::new(n);
    for (idx, s) in simplices.iter().enumerate() {
        match s.dim() {
            0 => {}
            1 => {
                let (a, b) = (facets[idx][0] as usize, facets[idx][1] as usize);
                let (ra, rb) = (uf.find(a), uf.find(b));
                if ra == rb {
                    if max_hom_dim >= 1 && !cleared[idx] {
                        diagrams[1].push(s.value, f64::INFINITY);
                    }
                } else {
                    // roots are the oldest simplex of their component
                    let (elder, younger) = if ra < rb { (ra, rb) } else { (rb, ra) };
                    diagrams[0].push(simplices[younger].value, s.value);
                    uf.link(elder, younger);
                }
            }
            _ => {}
        }
    }
    for (idx, s) in simplices.iter().enumerate() {
        if s.dim() == 0 && uf.find(idx) == idx {
            diagrams[0].push(s.value, f64::INFINITY);
        }
    }
    Ok(diagrams)
}

/// Symmetric difference of two sorted index lists (column addition over GF(2)).
fn xor_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Betti numbers of the sublevel complex at `epsilon`: the number of diagram
/// points with `birth <= epsilon < death`, in every dimension of the complex.
pub fn betti_at(complex: &FilteredComplex, epsilon: f64) -> Result<BettiProfile> {
    let top = complex.max_dim().unwrap_or(0);
    let diagrams = compute_persistence(complex, top)?;
    Ok(betti_from_diagrams(&diagrams, epsilon))
}

pub fn betti_from_diagrams(diagrams: &[PersistenceDiagram], epsilon: f64) -> BettiProfile {
    BettiProfile {
        betti: diagrams
            .iter()
            .map(|d| {
                d.points
                    .iter()
                    .filter(|p| p.birth <= epsilon && epsilon < p.death)
                    .count()
            })
            .collect(),
    }
}

/// Serializes diagrams as `dim birth death` lines (`inf` for essential
/// classes), ordered by (dim, birth, death).
pub fn diagrams_to_text(diagrams: &[PersistenceDiagram]) -> String {
    let mut out = String::new();
    let mut sorted: Vec<&PersistenceDiagram> = diagrams.iter().collect();
    sorted.sort_by_key(|d| d.dim);
    for d in sorted {
        for p in d.canonical().points {
            let _ = writeln!(out, "{} {} {}", d.dim, p.birth, p.death);
        }
    }
    out
}

/// Parses the output of [`diagrams_to_text`] into diagrams `0..=max_dim`.
pub fn diagrams_from_text(text: &str, max_dim: usize) -> Result<Vec<PersistenceDiagram>> {
    let mut diagrams: Vec<PersistenceDiagram> =
        (0..=max_dim).map(PersistenceDiagram::empty).collect();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let bad = || Error::Format(format!("bad diagram line {line:?}"));
        let mut f = line.split_whitespace();
        let (Some(d), Some(b), Some(e), None) = (f.next(), f.next(), f.next(), f.next()) else {
            return Err(bad());
        };
        let dim: usize = d.parse().map_err(|_| bad())?;
        let birth: f64 = b.parse().map_err(|_| bad())?;
        let death: f64 = e.parse().map_err(|_| bad())?;
        if dim > max_dim || !birth.is_finite() || death.is_nan() || death < birth {
            return Err(bad());
        }
        diagrams[dim].points.push(PdPoint { birth, death });
    }
    Ok(diagrams)
}
