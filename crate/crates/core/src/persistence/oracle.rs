//! Reference persistence from ranks of boundary maps.
//!
//! For sublevel complexes `K_a ⊆ K_b` the persistent Betti number is
//!
//! ```text
//! β_k(a, b) = dim Z_k(K_a) − dim (B_k(K_b) ∩ C_k(K_a))
//! ```
//!
//! and the second term equals `rank ∂_{k+1}|K_b − rank P ∂_{k+1}|K_b`, where
//! `P` keeps only rows of `k`-simplices outside `K_a`. Interval multiplicities
//! follow by inclusion–exclusion over consecutive filtration values. Nothing
//! here shares code with the reduction engines beyond the complex type.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::filtration::{FaceKey, FilteredComplex};

use super::PersistenceDiagram;

/// Largest complex the oracle accepts; its cost grows with the cube of the
/// number of distinct filtration values.
pub const ORACLE_MAX_SIMPLICES: usize = 400;

/// Diagrams for every dimension `0..=max_dim` of the complex, computed from
/// ranks alone. Refuses complexes above [`ORACLE_MAX_SIMPLICES`].
pub fn oracle_persistence(complex: &FilteredComplex) -> Result<Vec<PersistenceDiagram>> {
    let n = complex.simplices.len();
    if n > ORACLE_MAX_SIMPLICES {
        return Err(Error::Argument(format!(
            "oracle refuses complexes with {n} > {ORACLE_MAX_SIMPLICES} simplices"
        )));
    }
    let Some(top) = complex.simplices.iter().map(|s| s.dim()).max() else {
        return Ok(vec![PersistenceDiagram::empty(0)]);
    };

    // Per dimension: positions of k-simplices and their filtration values.
    let mut by_dim: Vec<Vec<usize>> = vec![Vec::new(); top + 1];
    let mut local: Vec<usize> = vec![0; n];
    for (i, s) in complex.simplices.iter().enumerate() {
        local[i] = by_dim[s.dim()].len();
        by_dim[s.dim()].push(i);
    }
    let index: HashMap<FaceKey, usize> = complex
        .simplices
        .iter()
        .enumerate()
        .map(|(i, s)| (s.key(), i))
        .collect();
    // boundary[k][j]: local row indices (among (k-1)-simplices) of the j-th k-simplex
    let boundary: Vec<Vec<Vec<usize>>> = (0..=top)
        .map(|k| {
            by_dim[k]
                .iter()
                .map(|&i| {
                    complex.simplices[i]
                        .facets()
                        .map(|f| {
                            index.get(&f).map(|&p| local[p]).ok_or_else(|| {
                                Error::Consistency(format!("missing face {:?}", f.vertices()))
                            })
                        })
                        .collect::<Result<Vec<usize>>>()
                })
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;

    let mut values: Vec<f64> = complex.simplices.iter().map(|s| s.value).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let m = values.len();
    // level[i]: index into `values` of simplex i
    let level: Vec<usize> = complex
        .simplices
        .iter()
        .map(|s| values.partition_point(|&v| v < s.value))
        .collect();

    let mut diagrams = Vec::with_capacity(top + 1);
    for k in 0..=top {
        let rows_k = by_dim[k].len();
        // rank of ∂_k restricted to K_a, for each a
        let rank_dk: Vec<usize> = (0..m)
            .map(|a| {
                if k == 0 {
                    return 0;
                }
                let cols = by_dim[k].iter().enumerate().filter(|(_, &i)| level[i] <= a);
                rank_gf2(
                    by_dim[k - 1].len(),
                    cols.map(|(j, _)| boundary[k][j].iter().copied()),
                )
            })
            .collect();
        let count_k: Vec<usize> = (0..m)
            .map(|a| by_dim[k].iter().filter(|&&i| level[i] <= a).count())
            .collect();
        let cofaces: Vec<(usize, &Vec<usize>)> = if k < top {
            by_dim[k + 1]
                .iter()
                .enumerate()
                .map(|(j, &i)| (level[i], &boundary[k + 1][j]))
                .collect()
        } else {
            Vec::new()
        };
        let (level, by_dim) = (&level, &by_dim);
        let rank_boundaries = |a: Option<usize>, b: usize| -> usize {
            let cols = cofaces.iter().filter(|(lv, _)| *lv <= b).map(|(_, rows)| {
                rows.iter()
                    .copied()
                    .filter(move |&r| a.is_none_or(|a| level[by_dim[k][r]] > a))
            });
            rank_gf2(rows_k, cols)
        };
        let rank_b: Vec<usize> = (0..m).map(|b| rank_boundaries(None, b)).collect();

        // beta[a][b] for a <= b
        let mut beta = vec![vec![0i64; m]; m];
        for a in 0..m {
            let cycles = (count_k[a] - rank_dk[a]) as i64;
            for b in a..m {
                let outside = rank_boundaries(Some(a), b);
                beta[a][b] = cycles - (rank_b[b] as i64 - outside as i64);
            }
        }
        let get = |a: isize, b: usize| -> i64 {
            if a < 0 {
                0
            } else {
                beta[a as usize][b]
            }
        };

        let mut diagram = PersistenceDiagram::empty(k);
        for i in 0..m {
            let ii = i as isize;
            for j in i + 1..m {
                let mult = get(ii, j - 1) - get(ii - 1, j - 1) - get(ii, j) + get(ii - 1, j);
                debug_assert!(mult >= 0, "negative multiplicity {mult}");
                for _ in 0..mult {
                    diagram.push(values[i], values[j]);
                }
            }
            let essential = get(ii, m - 1) - get(ii - 1, m - 1);
            for _ in 0..essential {
                diagram.push(values[i], f64::INFINITY);
            }
        }
        diagrams.push(diagram);
    }
    Ok(diagrams)
}

/// Rank over GF(2) of the matrix whose columns have the given nonzero rows.
fn rank_gf2<C, I>(rows: usize, columns: C) -> usize
where
    C: Iterator<Item = I>,
    I: Iterator<Item = usize>,
{
    let words = rows.div_ceil(64).max(1);
    // basis[r]: reduced vector whose highest set bit is r
    let mut basis: HashMap<usize, Vec<u64>> = HashMap::new();
    let mut rank = 0;
    for col in columns {
        let mut v = vec![0u64; words];
        for r in col {
            v[r / 64] ^= 1 << (r % 64);
        }
        while let Some(high) = highest_bit(&v) {
            match basis.get(&high) {
                Some(b) => v.iter_mut().zip(b).for_each(|(x, y)| *x ^= y),
                None => {
                    basis.insert(high, v);
                    rank += 1;
                    break;
                }
            }
        }
    }
    rank
}

fn highest_bit(v: &[u64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .rev()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + 63 - w.leading_zeros() as usize)
}
