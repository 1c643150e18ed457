//! Soft-margin C-SVM with an RBF kernel, solved by sequential minimal
//! optimization.
//!
//! The solver follows the LIBSVM formulation: minimize `½αᵀQα − eᵀα` with
//! `Q_ij = y_i y_j K(x_i, x_j)`, `0 ≤ α ≤ C`, `yᵀα = 0`, choosing working pairs
//! by maximal violation plus second-order gain and stopping when the maximal
//! KKT violation drops below `eps`. No shrinking and no kernel cache: the
//! kernel matrix is held in memory.

use crate::envelope::{EnvelopeReader, EnvelopeWriter};
use crate::error::{Error, Result};
use crate::linalg::squared_distance;

use super::Label;

pub const DEFAULT_EPS: f64 = 1e-3;
const TAU: f64 = 1e-12;

/// `exp(−‖u − v‖² / scale²)`: inputs are divided by `scale` before the
/// Gaussian, with no factor ½.
pub fn rbf(sq_dist: f64, scale: f64) -> f64 {
    (-sq_dist / (scale * scale)).exp()
}

/// Row-major `n × n` matrix of squared Euclidean distances.
pub fn squared_distances(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = squared_distance(&rows[i], &rows[j]);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Dual solution on a precomputed kernel matrix.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Decision function is `Σ α_i y_i K(x_i, x) − rho`.
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves the dual for kernel matrix `kernel` (row-major `n × n`).
pub fn solve_dual(kernel: &[f64], labels: &[Label], c: f64, eps: f64) -> Result<DualSolution> {
    let n = labels.len();
    if kernel.len() != n * n {
        return Err(Error::Argument(
            "kernel matrix size does not match labels".into(),
        ));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Argument(format!(
            "box constraint must be positive, got {c}"
        )));
    }
    let has_pos = labels.contains(&Label::Positive);
    let has_neg = labels.contains(&Label::Negative);
    if !(has_pos && has_neg) {
        return Err(Error::Argument(
            "training data must contain both classes".into(),
        ));
    }
    let y: Vec<f64> = labels.iter().map(|&l| l.sign()).collect();
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = 10_000_000usize.max(100 * n);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        let Some((i, j)) = select_pair(&alpha, &grad, &y, kernel, c, eps) else {
            converged = true;
            break;
        };
        iterations += 1;
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = q(i, j);
        let (kii, kjj) = (kernel[i * n + i], kernel[j * n + j]);
        if y[i] != y[j] {
            let quad = positive_or_tau(kii + kjj + 2.0 * qij);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = positive_or_tau(kii + kjj - 2.0 * qij);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    let rho = compute_rho(&alpha, &grad, &y, c);
    Ok(DualSolution {
        alpha,
        rho,
        iterations,
        converged,
    })
}

fn positive_or_tau(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        TAU
    }
}

fn in_up(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha < c) || (y < 0.0 && alpha > 0.0)
}

fn in_low(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha > 0.0) || (y < 0.0 && alpha < c)
}

/// Maximal-violation first index, second-order-gain second index. `None` when
/// the violation is below `eps`.
fn select_pair(
    alpha: &[f64],
    grad: &[f64],
    y: &[f64],
    kernel: &[f64],
    c: f64,
    eps: f64,
) -> Option<(usize, usize)> {
    let n = alpha.len();
    let mut gmax = f64::NEG_INFINITY;
    let mut i = None;
    for t in 0..n {
        if in_up(alpha[t], y[t], c) && -y[t] * grad[t] >= gmax {
            gmax = -y[t] * grad[t];
            i = Some(t);
        }
    }
    let i = i?;
    let mut gmax2 = f64::NEG_INFINITY;
    let mut best = None;
    let mut best_obj = f64::INFINITY;
    for t in 0..n {
        if !in_low(alpha[t], y[t], c) {
            continue;
        }
        let v = y[t] * grad[t];
        if v >= gmax2 {
            gmax2 = v;
        }
        let grad_diff = gmax + v;
        if grad_diff > 0.0 {
            let quad = kernel[i * n + i] + kernel[t * n + t] - 2.0 * kernel[i * n + t];
            let obj = -(grad_diff * grad_diff) / positive_or_tau(quad);
            if obj <= best_obj {
                best_obj = obj;
                best = Some(t);
            }
        }
    }
    if gmax + gmax2 < eps {
        return None;
    }
    best.map(|j| (i, j))
}

fn compute_rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    if free > 0 {
        sum_free / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Maximal KKT violation `m(α) − M(α)` with the gradient recomputed from
/// scratch; zero or negative at an exact optimum.
pub fn kkt_violation(kernel: &[f64], labels: &[Label], alpha: &[f64], c: f64) -> f64 {
    let n = labels.len();
    let y: Vec<f64> = labels.iter().map(|&l| l.sign()).collect();
    let grad: Vec<f64> = (0..n)
        .map(|t| {
            (0..n)
                .map(|s| y[t] * y[s] * kernel[t * n + s] * alpha[s])
                .sum::<f64>()
                - 1.0
        })
        .collect();
    let up = (0..n)
        .filter(|&t| in_up(alpha[t], y[t], c))
        .map(|t| -y[t] * grad[t])
        .fold(f64::NEG_INFINITY, f64::max);
    let low = (0..n)
        .filter(|&t| in_low(alpha[t], y[t], c))
        .map(|t| -y[t] * grad[t])
        .fold(f64::INFINITY, f64::min);
    (up - low).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub c: f64,
    pub scale: f64,
    pub bias: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i y_i` for each support vector.
    pub coefficients: Vec<f64>,
    pub converged: bool,
}

/// Trains on rows `x` with labels `y`.
pub fn svm_train(x: &[Vec<f64>], y: &[Label], c: f64, scale: f64) -> Result<SvmModel> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Argument(
            "feature and label counts differ or are zero".into(),
        ));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Argument(format!(
            "kernel scale must be positive, got {scale}"
        )));
    }
    let d = squared_distances(x);
    let kernel: Vec<f64> = d.iter().map(|&v| rbf(v, scale)).collect();
    svm_train_kernel(x, y, &kernel, c, scale)
}

/// As [`svm_train`] with the kernel matrix of `x` already computed.
pub fn svm_train_kernel(
    x: &[Vec<f64>],
    y: &[Label],
    kernel: &[f64],
    c: f64,
    scale: f64,
) -> Result<SvmModel> {
    let sol = solve_dual(kernel, y, c, DEFAULT_EPS)?;
    if !sol.converged {
        log::warn!(
            "SMO stopped after {} iterations without meeting tolerance",
            sol.iterations
        );
    }
    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for (t, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(x[t].clone());
            coefficients.push(a * y[t].sign());
        }
    }
    Ok(SvmModel {
        c,
        scale,
        bias: -sol.rho,
        support_vectors,
        coefficients,
        converged: sol.converged,
    })
}

impl SvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, a)| a * rbf(squared_distance(sv, x), self.scale))
            .sum::<f64>()
            + self.bias
    }

    /// Positive when the decision value is strictly positive.
    pub fn predict(&self, x: &[f64]) -> Label {
        if self.decision(x) > 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub(crate) fn write(&self, w: &mut EnvelopeWriter) {
        w.f64(self.c)
            .f64(self.scale)
            .f64(self.bias)
            .u64(self.support_vectors.len() as u64);
        for sv in &self.support_vectors {
            w.f64s(sv);
        }
        w.f64s(&self.coefficients).u64(self.converged as u64);
    }

    pub(crate) fn read(r: &mut EnvelopeReader) -> Result<Self> {
        let (c, scale, bias) = (r.f64()?, r.f64()?, r.f64()?);
        let n = r.usize()?;
        let support_vectors: Vec<Vec<f64>> = (0..n).map(|_| r.f64s()).collect::<Result<_>>()?;
        let coefficients = r.f64s()?;
        let converged = r.u64()? != 0;
        if coefficients.len() != n {
            return Err(Error::Format(
                "SVM block dimensions are inconsistent".into(),
            ));
        }
        Ok(SvmModel {
            c,
            scale,
            bias,
            support_vectors,
            coefficients,
            converged,
        })
    }
}
