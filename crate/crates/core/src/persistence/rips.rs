//! Vietoris–Rips persistent cohomology without materializing the complex.
//!
//! Simplices are addressed by their colexicographic rank in the combinatorial
//! number system; coboundaries are enumerated on demand from a dense matrix of
//! edge values. Dimension 0 uses union-find, higher dimensions reduce
//! coboundary columns in reverse filtration order with clearing, and a column
//! whose leading coface is unclaimed is paired without building its full
//! coboundary.
//!
//! The filtration is truncated at `min(threshold, enclosing radius)`: past the
//! enclosing radius the complex is a cone, so no class of positive persistence
//! is born or survives there and the diagrams are unchanged.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::error::{Error, Result};
use crate::filtration::edge_value_matrix;

use super::{PersistenceDiagram, UnionFind};

/// Persistence diagrams `0..=max_hom_dim` of the Vietoris–Rips filtration of
/// `points`, with edges entering at half the Euclidean distance.
pub fn vr_persistence(
    points: &[[f64; 3]],
    max_hom_dim: usize,
    threshold: f64,
) -> Result<Vec<PersistenceDiagram>> {
    if points.is_empty() {
        return Err(Error::Argument("empty point cloud".into()));
    }
    RipsEngine::new(
        edge_value_matrix(points),
        points.len(),
        max_hom_dim,
        threshold,
    )?
    .run()
}

/// Same as [`vr_persistence`] for a symmetric `n x n` matrix of edge values.
pub fn rips_from_matrix(
    values: Vec<f64>,
    n: usize,
    max_hom_dim: usize,
    threshold: f64,
) -> Result<Vec<PersistenceDiagram>> {
    if n == 0 || values.len() != n * n {
        return Err(Error::Argument(format!(
            "expected a nonempty {n}x{n} matrix, got {} entries",
            values.len()
        )));
    }
    RipsEngine::new(values, n, max_hom_dim, threshold)?.run()
}

/// Enclosing radius: beyond it one vertex is adjacent to every other.
pub fn enclosing_radius(values: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|i| {
            values[i * n..(i + 1) * n]
                .iter()
                .copied()
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    diam: f64,
    index: u64,
}

// Heap order: the maximum is the earliest simplex in the filtration, i.e. the
// smallest diameter and, among equal diameters, the largest index.
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .diam
            .total_cmp(&self.diam)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

struct Binomials {
    table: Vec<Vec<u64>>,
}

impl Binomials {
    fn new(n: usize, k_max: usize) -> Self {
        let mut table = vec![vec![0u64; n + 1]; k_max + 1];
        for v in 0..=n {
            table[0][v] = 1;
            for k in 1..=k_max.min(v) {
                table[k][v] = table[k - 1][v - 1] + if k < v { table[k][v - 1] } else { 0 };
            }
        }
        Self { table }
    }

    #[inline]
    fn get(&self, v: usize, k: usize) -> u64 {
        if k > v {
            0
        } else {
            self.table[k][v]
        }
    }
}

struct RipsEngine {
    values: Vec<f64>,
    n: usize,
    max_hom_dim: usize,
    threshold: f64,
    binom: Binomials,
}

impl RipsEngine {
    fn new(values: Vec<f64>, n: usize, max_hom_dim: usize, threshold: f64) -> Result<Self> {
        if threshold.is_nan() || threshold <= 0.0 {
            return Err(Error::Argument(format!(
                "threshold must be positive, got {threshold}"
            )));
        }
        if max_hom_dim > 2 {
            return Err(Error::Argument(format!(
                "homology above dimension 2 is not supported (asked for {max_hom_dim})"
            )));
        }
        let threshold = if n > 1 {
            threshold.min(enclosing_radius(&values, n))
        } else {
            threshold
        };
        Ok(Self {
            binom: Binomials::new(n, max_hom_dim + 2),
            values,
            n,
            max_hom_dim,
            threshold,
        })
    }

    #[inline]
    fn value(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.n + b]
    }

    /// Vertices of the `dim`-simplex with rank `index`, largest first.
    fn vertices(&self, mut index: u64, dim: usize, out: &mut Vec<usize>) {
        out.clear();
        let mut hi = self.n;
        for k in (1..=dim + 1).rev() {
            // largest v < hi with C(v, k) <= index
            let (mut lo, mut top) = (k - 1, hi);
            while top - lo > 1 {
                let mid = (lo + top) / 2;
                if self.binom.get(mid, k) <= index {
                    lo = mid;
                } else {
                    top = mid;
                }
            }
            out.push(lo);
            index -= self.binom.get(lo, k);
            hi = lo;
        }
    }

    fn run(self) -> Result<Vec<PersistenceDiagram>> {
        let mut diagrams: Vec<PersistenceDiagram> = (0..=self.max_hom_dim)
            .map(PersistenceDiagram::empty)
            .collect();

        let mut edges: Vec<Entry> = Vec::new();
        for b in 1..self.n {
            for a in 0..b {
                let diam = self.value(a, b);
                if diam <= self.threshold {
                    edges.push(Entry {
                        diam,
                        index: self.binom.get(b, 2) + a as u64,
                    });
                }
            }
        }
        // filtration order = descending heap order
        edges.sort_unstable_by(|x, y| y.cmp(x));

        let mut uf = UnionFind::new(self.n);
        let mut columns = Vec::new();
        let mut verts = Vec::with_capacity(4);
        for e in &edges {
            self.vertices(e.index, 1, &mut verts);
            let (ra, rb) = (uf.find(verts[0]), uf.find(verts[1]));
            if ra == rb {
                columns.push(*e);
            } else {
                diagrams[0].push(0.0, e.diam);
                uf.link(ra.min(rb), ra.max(rb));
            }
        }
        for v in 0..self.n {
            if uf.find(v) == v {
                diagrams[0].push(0.0, f64::INFINITY);
            }
        }

        let mut simplices = edges;
        for dim in 1..=self.max_hom_dim {
            let pivots = self.reduce(dim, &mut columns, &mut diagrams[dim]);
            if dim < self.max_hom_dim {
                let (next_simplices, next_columns) = self.assemble(dim, &simplices, &pivots);
                simplices = next_simplices;
                columns = next_columns;
            }
        }
        Ok(diagrams)
    }

    /// All `(dim + 1)`-simplices within the threshold, and the subset that is
    /// not cleared by a pivot of the `dim` reduction.
    fn assemble(
        &self,
        dim: usize,
        simplices: &[Entry],
        pivots: &HashMap<u64, usize>,
    ) -> (Vec<Entry>, Vec<Entry>) {
        let mut next = Vec::new();
        let mut verts = Vec::with_capacity(4);
        for s in simplices {
            self.vertices(s.index, dim, &mut verts);
            let top = verts[0];
            for v in top + 1..self.n {
                let diam = verts
                    .iter()
                    .fold(s.diam, |acc, &u| acc.max(self.value(u, v)));
                if diam <= self.threshold {
                    next.push(Entry {
                        diam,
                        index: s.index + self.binom.get(v, dim + 2),
                    });
                }
            }
        }
        let columns = next
            .iter()
            .copied()
            .filter(|e| !pivots.contains_key(&e.index))
            .collect();
        (next, columns)
    }

    /// Cofaces of a `dim`-simplex within the threshold, in decreasing index order.
    fn coboundary(&self, s: Entry, dim: usize, verts: &mut Vec<usize>) -> CofaceIter<'_> {
        self.vertices(s.index, dim, verts);
        CofaceIter {
            engine: self,
            verts: verts.clone(),
            diam: s.diam,
            next_vertex: self.n,
            pos: 0,
            k: dim + 1,
            idx_below: s.index,
            idx_above: 0,
        }
    }

    /// Reduces the columns of dimension `dim`, writing intervals into `diagram`.
    /// Returns the map from pivot coface to the position of its column.
    fn reduce(
        &self,
        dim: usize,
        columns: &mut [Entry],
        diagram: &mut PersistenceDiagram,
    ) -> HashMap<u64, usize> {
        // reverse filtration order
        columns.sort_unstable();
        let mut pivots: HashMap<u64, usize> = HashMap::with_capacity(columns.len());
        // reduction[j]: simplices other than columns[j] added into column j
        let mut reduction: Vec<Vec<Entry>> = vec![Vec::new(); columns.len()];
        let mut verts = Vec::with_capacity(4);
        let mut heap = BinaryHeap::new();

        for j in 0..columns.len() {
            let col = columns[j];

            // Leading coface of the unreduced column: cofaces never have a
            // smaller diameter, so the first one (by decreasing index) with
            // equal diameter is the pivot. If no earlier column claims it, the
            // column is already reduced.
            let mut cofaces = self.coboundary(col, dim, &mut verts);
            let mut seen = Vec::new();
            let mut paired = false;
            for c in cofaces.by_ref() {
                seen.push(c);
                if c.diam == col.diam {
                    if let std::collections::hash_map::Entry::Vacant(e) = pivots.entry(c.index) {
                        e.insert(j);
                        paired = true;
                    }
                    break;
                }
            }
            if paired {
                continue;
            }
            seen.extend(cofaces);

            heap.clear();
            heap.extend(seen);
            let mut added: Vec<Entry> = Vec::new();
            loop {
                match get_pivot(&mut heap) {
                    None => {
                        diagram.push(col.diam, f64::INFINITY);
                        break;
                    }
                    Some(pivot) => match pivots.get(&pivot.index) {
                        Some(&other) => {
                            let source = std::iter::once(columns[other])
                                .chain(reduction[other].iter().copied());
                            for s in source {
                                added.push(s);
                                heap.extend(self.coboundary(s, dim, &mut verts));
                            }
                        }
                        None => {
                            diagram.push(col.diam, pivot.diam);
                            pivots.insert(pivot.index, j);
                            reduction[j] = cancel_pairs(added);
                            break;
                        }
                    },
                }
            }
        }
        pivots
    }
}

/// Leading entry of a working column stored as a heap with repeated entries,
/// cancelling pairs mod 2. The pivot stays in the heap.
fn get_pivot(heap: &mut BinaryHeap<Entry>) -> Option<Entry> {
    loop {
        let top = heap.pop()?;
        if heap.peek().is_some_and(|next| next.index == top.index) {
            heap.pop();
            continue;
        }
        heap.push(top);
        return Some(top);
    }
}

fn cancel_pairs(mut entries: Vec<Entry>) -> Vec<Entry> {
    entries.sort_unstable_by_key(|e| e.index);
    let mut out: Vec<Entry> = Vec::with_capacity(entries.len());
    for e in entries {
        if out.last().is_some_and(|l| l.index == e.index) {
            out.pop();
        } else {
            out.push(e);
        }
    }
    out
}

/// Enumerates cofaces by inserting each absent vertex, from the largest down.
struct CofaceIter<'a> {
    engine: &'a RipsEngine,
    /// vertices of the simplex, largest first
    verts: Vec<usize>,
    diam: f64,
    next_vertex: usize,
    /// number of simplex vertices already above `next_vertex`
    pos: usize,
    /// rank of the binomial used for the inserted vertex
    k: usize,
    idx_below: u64,
    idx_above: u64,
}

impl Iterator for CofaceIter<'_> {
    type Item = Entry;

    fn next(&mut self) -> Option<Entry> {
        let e = self.engine;
        loop {
            if self.next_vertex == 0 {
                return None;
            }
            let v = self.next_vertex - 1;
            self.next_vertex = v;
            if self.pos < self.verts.len() && self.verts[self.pos] == v {
                // move this vertex from the "below" to the "above" part
                let k = self.k;
                self.idx_below -= e.binom.get(v, k);
                self.idx_above += e.binom.get(v, k + 1);
                self.pos += 1;
                self.k -= 1;
                continue;
            }
            let diam = self
                .verts
                .iter()
                .fold(self.diam, |acc, &u| acc.max(e.value(u, v)));
            if diam > e.threshold {
                continue;
            }
            return Some(Entry {
                diam,
                index: self.idx_above + e.binom.get(v, self.k + 1) + self.idx_below,
            });
        }
    }
}
