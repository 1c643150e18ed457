//! Hyperparameter selection by cross-validated misclassification rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

use super::cv::stratified_folds;
use super::svm::{rbf, solve_dual, squared_distances, DEFAULT_EPS};
use super::Label;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBounds {
    pub c_min: f64,
    pub c_max: f64,
    pub scale_min: f64,
    pub scale_max: f64,
}

impl Default for SearchBounds {
    fn default() -> Self {
        Self {
            c_min: 1e-3,
            c_max: 1e3,
            scale_min: 1e-3,
            scale_max: 1e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SearchStrategy {
    /// `points × points` log-spaced grid, C in the outer loop.
    Grid { points: usize },
    /// `budget` log-uniform draws from a seeded generator.
    Random { budget: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub strategy: SearchStrategy,
    pub bounds: SearchBounds,
    /// Folds of the inner cross-validation, lowered to the minority class size.
    pub inner_folds: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            strategy: SearchStrategy::Grid { points: 7 },
            bounds: SearchBounds::default(),
            inner_folds: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    pub c: f64,
    pub scale: f64,
    /// Pooled misclassification rate over the inner folds.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub best: Candidate,
    pub evaluated: Vec<Candidate>,
}

fn log_space(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![(lo * hi).sqrt()];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..points)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64))
        .collect()
}

/// Candidate `(C, scale)` pairs in evaluation order.
pub fn candidates(config: &SearchConfig, seed: u64) -> Result<Vec<(f64, f64)>> {
    let b = &config.bounds;
    let ok = |lo: f64, hi: f64| lo > 0.0 && hi >= lo && hi.is_finite();
    if !ok(b.c_min, b.c_max) || !ok(b.scale_min, b.scale_max) {
        return Err(Error::Argument(format!("invalid search bounds {b:?}")));
    }
    match config.strategy {
        SearchStrategy::Grid { points } if points > 0 => {
            let cs = log_space(b.c_min, b.c_max, points);
            let ss = log_space(b.scale_min, b.scale_max, points);
            Ok(cs
                .iter()
                .flat_map(|&c| ss.iter().map(move |&s| (c, s)))
                .collect())
        }
        SearchStrategy::Random { budget } if budget > 0 => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EA2_C400_0000_0001);
            let draw = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
                let (a, b) = (lo.log10(), hi.log10());
                10f64.powf(a + (b - a) * rng.random::<f64>())
            };
            Ok((0..budget)
                .map(|_| {
                    let c = draw(&mut rng, b.c_min, b.c_max);
                    let s = draw(&mut rng, b.scale_min, b.scale_max);
                    (c, s)
                })
                .collect())
        }
        _ => Err(Error::Argument(
            "search needs at least one candidate".into(),
        )),
    }
}

/// Evaluates every candidate by stratified inner cross-validation and returns
/// the first one attaining the minimal loss.
pub fn hyperparam_search(
    x: &[Vec<f64>],
    y: &[Label],
    config: &SearchConfig,
    seed: u64,
) -> Result<SearchResult> {
    let n = y.len();
    if x.len() != n {
        return Err(Error::Argument("feature and label counts differ".into()));
    }
    let minority = y
        .iter()
        .filter(|&&l| l == Label::Positive)
        .count()
        .min(y.iter().filter(|&&l| l == Label::Negative).count());
    let k = config.inner_folds.min(minority);
    if k < 2 {
        return Err(Error::Argument(format!(
            "each class needs at least 2 samples for inner cross-validation (smallest has {minority})"
        )));
    }
    let folds = stratified_folds(y, k, seed)?;
    let dist = squared_distances(x);
    let pairs = candidates(config, seed)?;

    let evaluated: Vec<Candidate> = pairs
        .par_iter()
        .map(|&(c, scale)| {
            let mut errors = 0usize;
            for f in 0..k {
                let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
                let test: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
                let m = train.len();
                let mut kernel = vec![0.0; m * m];
                for (a, &i) in train.iter().enumerate() {
                    for (b, &j) in train.iter().enumerate() {
                        kernel[a * m + b] = rbf(dist[i * n + j], scale);
                    }
                }
                let labels: Vec<Label> = train.iter().map(|&i| y[i]).collect();
                let sol = solve_dual(&kernel, &labels, c, DEFAULT_EPS)?;
                for &t in &test {
                    let f: f64 = train
                        .iter()
                        .zip(&sol.alpha)
                        .filter(|(_, &a)| a > 0.0)
                        .map(|(&i, &a)| a * y[i].sign() * rbf(dist[i * n + t], scale))
                        .sum::<f64>()
                        - sol.rho;
                    let predicted = if f > 0.0 {
                        Label::Positive
                    } else {
                        Label::Negative
                    };
                    if predicted != y[t] {
                        errors += 1;
                    }
                }
            }
            Ok(Candidate {
                c,
                scale,
                loss: errors as f64 / n as f64,
            })
        })
        .collect::<Result<_>>()?;

    let mut best = evaluated[0];
    for cand in &evaluated[1..] {
        if cand.loss < best.loss {
            best = *cand;
        }
    }
    Ok(SearchResult { best, evaluated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blobs(seed: u64, n: usize, gap: f64) -> (Vec<Vec<f64>>, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let (cx, l) = if i % 2 == 0 {
                    (gap, Label::Positive)
                } else {
                    (-gap, Label::Negative)
                };
                (
                    vec![
                        cx + rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    ],
                    l,
                )
            })
            .unzip()
    }

    #[test]
    fn grid_is_decades() {
        let c = candidates(&SearchConfig::default(), 0).unwrap();
        assert_eq!(c.len(), 49);
        assert_eq!(c[0], (1e-3, 1e-3));
        assert!((c[1].1 - 1e-2).abs() < 1e-15);
        assert!((c[48].0 - 1e3).abs() < 1e-9);
    }

    #[test]
    fn returns_the_first_argmin() {
        let (x, y) = blobs(2, 30, 0.7);
        let cfg = SearchConfig {
            strategy: SearchStrategy::Grid { points: 4 },
            ..SearchConfig::default()
        };
        let r = hyperparam_search(&x, &y, &cfg, 9).unwrap();
        assert_eq!(r.evaluated.len(), 16);
        let min = r
            .evaluated
            .iter()
            .map(|c| c.loss)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.best.loss, min);
        let first = r.evaluated.iter().find(|c| c.loss == min).unwrap();
        assert_eq!(&r.best, first);
    }

    #[test]
    fn seeded_random_search_is_deterministic() {
        let (x, y) = blobs(3, 24, 1.0);
        let cfg = SearchConfig {
            strategy: SearchStrategy::Random { budget: 12 },
            ..SearchConfig::default()
        };
        let a = hyperparam_search(&x, &y, &cfg, 5).unwrap();
        let b = hyperparam_search(&x, &y, &cfg, 5).unwrap();
        assert_eq!(a, b);
        let c = candidates(&cfg, 6).unwrap();
        assert_ne!(c, candidates(&cfg, 5).unwrap());
        assert!(c
            .iter()
            .all(|&(c, s)| (1e-3..=1e3).contains(&c) && (1e-3..=1e3).contains(&s)));
    }

    #[test]
    fn separable_data_is_learned() {
        let (x, y) = blobs(4, 40, 3.0);
        let r = hyperparam_search(&x, &y, &SearchConfig::default(), 1).unwrap();
        assert!(r.best.loss <= 0.01, "loss {}", r.best.loss);
    }
}
