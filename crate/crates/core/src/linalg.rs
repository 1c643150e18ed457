//! Dense vector helpers and the Gram-matrix route to principal directions.
//!
//! Both PGA and PCA work with far more ambient dimensions than samples, so the
//! eigenproblem is solved on the `N × N` Gram matrix and lifted back.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Symmetric matrix of pairwise inner products, row-major `n × n`.
pub fn gram_matrix(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| dot(&rows[i], &rows[j])).collect())
        .collect();
    let mut g = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + off;
            g[i * n + j] = v;
            g[j * n + i] = v;
        }
    }
    g
}

/// Leading principal directions of a sample set.
#[derive(Debug, Clone)]
pub struct Principal {
    /// Unit vectors, one per requested component, mutually orthogonal.
    pub directions: Vec<Vec<f64>>,
    /// Eigenvalues of `Σ r rᵀ` matching `directions` (zero for completed ones).
    pub eigenvalues: Vec<f64>,
    /// Trace of `Σ r rᵀ`.
    pub trace: f64,
}

/// Top-`k` eigenvectors of `Σ_i r_i r_iᵀ` for the given rows, computed from the
/// Gram matrix. Directions are kept orthogonal to every vector in `avoid`.
///
/// When the rows span fewer than `k` dimensions, the remaining directions are
/// completed deterministically from standard basis vectors. Each direction's
/// sign is fixed so that its largest-magnitude entry is positive.
pub fn principal_directions(rows: &[Vec<f64>], k: usize, avoid: &[&[f64]]) -> Result<Principal> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Argument("no samples".into()));
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Argument("samples differ in length".into()));
    }
    if k + avoid.len() > dim {
        return Err(Error::Argument(format!(
            "cannot extract {k} directions from a {dim}-dimensional space"
        )));
    }

    let g = gram_matrix(rows);
    let trace: f64 = (0..n).map(|i| g[i * n + i]).sum();
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, &g));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let top = order
        .first()
        .map(|&i| eig.eigenvalues[i])
        .unwrap_or(0.0)
        .max(0.0);
    let cutoff = top * 1e-12;

    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let lambda = eig.eigenvalues[idx];
        if lambda <= cutoff || lambda <= 0.0 {
            break;
        }
        let u = eig.eigenvectors.column(idx);
        let mut v = vec![0.0; dim];
        for (i, row) in rows.iter().enumerate() {
            axpy(u[i], row, &mut v);
        }
        let s = 1.0 / lambda.sqrt();
        v.iter_mut().for_each(|x| *x *= s);
        match orthonormalize(v, avoid, &directions) {
            Some(v) => {
                directions.push(v);
                eigenvalues.push(lambda);
            }
            None => break,
        }
    }

    let mut e = 0;
    while directions.len() < k {
        if e >= dim {
            return Err(Error::Argument(format!(
                "could not complete {k} orthonormal directions"
            )));
        }
        let mut v = vec![0.0; dim];
        v[e] = 1.0;
        e += 1;
        if let Some(v) = orthonormalize(v, avoid, &directions) {
            directions.push(v);
            eigenvalues.push(0.0);
        }
    }

    for d in &mut directions {
        canonical_sign(d);
    }
    Ok(Principal {
        directions,
        eigenvalues,
        trace,
    })
}

/// Modified Gram–Schmidt, applied twice, against `avoid` then `basis`.
/// Returns `None` when the vector has (numerically) nothing left.
fn orthonormalize(mut v: Vec<f64>, avoid: &[&[f64]], basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let initial = norm(&v);
    if initial == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for a in avoid {
            let c = dot(&v, a) / dot(a, a);
            axpy(-c, a, &mut v);
        }
        for b in basis {
            let c = dot(&v, b);
            axpy(-c, b, &mut v);
        }
    }
    let n = norm(&v);
    if n <= initial * 1e-8 {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n);
    Some(v)
}

fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
