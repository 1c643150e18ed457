//! Filtered simplicial complexes: Vietoris–Rips on point clouds and the
//! lower-star filtration of an image.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::imaging::{FeaturePointCloud, GrayImage};

/// A simplex on at most four vertices, with its filtration value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simplex {
    verts: [u32; 4],
    len: u8,
    pub value: f64,
}

impl Simplex {
    /// `vertices` must be strictly increasing and hold 1 to 4 ids.
    pub fn new(vertices: &[u32], value: f64) -> Result<Self> {
        if vertices.is_empty() || vertices.len() > 4 {
            return Err(Error::Argument(format!(
                "simplex needs 1..=4 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument(format!(
                "simplex vertices not strictly increasing: {vertices:?}"
            )));
        }
        if value.is_nan() || value < 0.0 {
            return Err(Error::Argument(format!("bad filtration value {value}")));
        }
        let mut verts = [0; 4];
        verts[..vertices.len()].copy_from_slice(vertices);
        Ok(Self {
            verts,
            len: vertices.len() as u8,
            value,
        })
    }

    #[inline]
    pub fn vertices(&self) -> &[u32] {
        &self.verts[..self.len as usize]
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.len as usize - 1
    }

    /// Codimension-one faces, in order of the dropped vertex.
    pub fn facets(&self) -> impl Iterator<Item = FaceKey> + '_ {
        let n = self.len as usize;
        (0..if n > 1 { n } else { 0 }).map(move |skip| {
            let mut verts = [0; 4];
            let mut k = 0;
            for (i, &v) in self.vertices().iter().enumerate() {
                if i != skip {
                    verts[k] = v;
                    k += 1;
                }
            }
            FaceKey {
                verts,
                len: (n - 1) as u8,
            }
        })
    }

    pub fn key(&self) -> FaceKey {
        FaceKey {
            verts: self.verts,
            len: self.len,
        }
    }

    /// Total filtration order: value, then dimension, then vertex tuple.
    pub fn filtration_cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then(self.len.cmp(&other.len))
            .then_with(|| self.vertices().cmp(other.vertices()))
    }
}

/// Hashable vertex tuple of a simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FaceKey {
    verts: [u32; 4],
    len: u8,
}

impl FaceKey {
    pub fn vertices(&self) -> &[u32] {
        &self.verts[..self.len as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComplexKind {
    VietorisRips,
    LowerStar,
    Custom,
}

/// Simplices listed in filtration order.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredComplex {
    pub simplices: Vec<Simplex>,
    pub vertex_count: usize,
    pub kind: ComplexKind,
}

impl FilteredComplex {
    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn max_dim(&self) -> Option<usize> {
        self.simplices.iter().map(Simplex::dim).max()
    }

    /// Checks the filtration invariants and returns, for every simplex, the
    /// positions of its facets.
    ///
    /// Fails when a facet is missing, appears later in the list, or has a larger
    /// filtration value, or when values decrease along the list.
    pub fn facet_positions(&self) -> Result<Vec<Vec<u32>>> {
        let mut position: HashMap<FaceKey, u32> = HashMap::with_capacity(self.simplices.len());
        let mut out = Vec::with_capacity(self.simplices.len());
        let mut prev = f64::NEG_INFINITY;
        for (idx, s) in self.simplices.iter().enumerate() {
            if s.value < prev {
                return Err(Error::Consistency(format!(
                    "filtration value decreases at position {idx} ({} after {prev})",
                    s.value
                )));
            }
            prev = s.value;
            let mut facets = Vec::with_capacity(s.dim() + 1);
            for f in s.facets() {
                let Some(&p) = position.get(&f) else {
                    return Err(Error::Consistency(format!(
                        "face {:?} of {:?} is missing or comes later",
                        f.vertices(),
                        s.vertices()
                    )));
                };
                if self.simplices[p as usize].value > s.value {
                    return Err(Error::Consistency(format!(
                        "face {:?} enters after its coface {:?}",
                        f.vertices(),
                        s.vertices()
                    )));
                }
                facets.push(p);
            }
            facets.sort_unstable();
            if position.insert(s.key(), idx as u32).is_some() {
                return Err(Error::Consistency(format!(
                    "duplicate simplex {:?}",
                    s.vertices()
                )));
            }
            out.push(facets);
        }
        Ok(out)
    }

    /// The subcomplex of simplices with value `<= epsilon`, in order.
    pub fn sublevel(&self, epsilon: f64) -> impl Iterator<Item = &Simplex> + '_ {
        self.simplices.iter().filter(move |s| s.value <= epsilon)
    }

    /// Debug export: one `dim value v0 v1 ...` line per simplex.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.simplices {
            let _ = write!(out, "{} {}", s.dim(), s.value);
            for v in s.vertices() {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for ComplexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComplexKind::VietorisRips => "vietoris-rips",
            ComplexKind::LowerStar => "lower-star",
            ComplexKind::Custom => "custom",
        })
    }
}

/// Filtration value of the edge between two points: half their Euclidean
/// distance, so the edge is present at scale `eps` exactly when `d <= 2 eps`.
#[inline]
pub fn edge_value(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2);
    d2.sqrt() / 2.0
}

/// Dense matrix of pairwise [`edge_value`]s.
pub fn edge_value_matrix(points: &[[f64; 3]]) -> Vec<f64> {
    let n = points.len();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = edge_value(&points[i], &points[j]);
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    }
    m
}

/// Explicit Vietoris–Rips filtration of the feature point cloud.
///
/// Vertices enter at 0, edges at half the centroid distance, and higher
/// simplices at the largest value among their edges. Simplices above
/// `threshold` or of dimension above `max_dim` are omitted.
pub fn build_vr_filtration(
    fpc: &FeaturePointCloud,
    max_dim: usize,
    threshold: f64,
) -> Result<FilteredComplex> {
    build_vr_from_points(&fpc.points(), max_dim, threshold)
}

pub fn build_vr_from_points(
    points: &[[f64; 3]],
    max_dim: usize,
    threshold: f64,
) -> Result<FilteredComplex> {
    if points.is_empty() {
        return Err(Error::Argument("empty point cloud".into()));
    }
    if max_dim > 3 {
        return Err(Error::Argument(format!("max_dim {max_dim} exceeds 3")));
    }
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::Argument(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    let n = points.len();
    let dist = edge_value_matrix(points);
    let mut simplices: Vec<Simplex> = (0..n as u32)
        .map(|v| Simplex::new(&[v], 0.0).expect("vertex"))
        .collect();

    // Clique expansion over higher-numbered neighbours.
    let neighbours: Vec<Vec<u32>> = (0..n)
        .map(|i| {
            (i + 1..n)
                .filter(|&j| dist[i * n + j] <= threshold)
                .map(|j| j as u32)
                .collect()
        })
        .collect();
    let mut stack: Vec<(Vec<u32>, f64, Vec<u32>)> = (0..n as u32)
        .map(|v| (vec![v], 0.0, neighbours[v as usize].clone()))
        .collect();
    while let Some((verts, value, candidates)) = stack.pop() {
        if verts.len() > max_dim {
            continue;
        }
        for (ci, &c) in candidates.iter().enumerate() {
            let mut v = value;
            for &u in &verts {
                v = v.max(dist[u as usize * n + c as usize]);
            }
            let mut next = verts.clone();
            next.push(c);
            simplices.push(Simplex::new(&next, v)?);
            let rest: Vec<u32> = candidates[ci + 1..]
                .iter()
                .copied()
                .filter(|&w| dist[c as usize * n + w as usize] <= threshold)
                .collect();
            if !rest.is_empty() {
                stack.push((next, v, rest));
            }
        }
    }
    sort_simplices(FilteredComplex {
        simplices,
        vertex_count: n,
        kind: ComplexKind::VietorisRips,
    })
}

/// Lower-star filtration of the 8-connected pixel graph, up to dimension 1.
///
/// Vertex `r * width + c` enters at its intensity; each edge at the larger of
/// its endpoint intensities.
pub fn build_lower_star(img: &GrayImage) -> FilteredComplex {
    let n = img.width() * img.height();
    let data = img.data();
    let mut simplices: Vec<Simplex> = (0..n)
        .map(|i| Simplex::new(&[i as u32], f64::from(data[i])).expect("vertex"))
        .collect();
    for i in 0..n {
        for j in img.neighbours8(i).filter(|&j| j > i) {
            let v = f64::from(data[i].max(data[j]));
            simplices.push(Simplex::new(&[i as u32, j as u32], v).expect("edge"));
        }
    }
    simplices.sort_by(Simplex::filtration_cmp);
    FilteredComplex {
        simplices,
        vertex_count: n,
        kind: ComplexKind::LowerStar,
    }
}

/// Sorts by (value, dimension, vertex tuple) and verifies that every face is
/// present and precedes its cofaces.
pub fn sort_simplices(mut complex: FilteredComplex) -> Result<FilteredComplex> {
    complex.simplices.sort_by(Simplex::filtration_cmp);
    complex.facet_positions()?;
    Ok(complex)
}
