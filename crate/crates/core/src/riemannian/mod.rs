//! Persistence diagrams as points on the unit Hilbert sphere.
//!
//! A diagram becomes an equal-weight mixture of isotropic bivariate normals
//! centred on its points, evaluated on a square grid over (birth, death) and
//! normalized to a discrete probability density. The entrywise square root of
//! `density × cell area` has unit Euclidean norm, so diagrams live on the unit
//! sphere, where geodesics have closed forms. [`pga`] reduces a collection of
//! such points with principal geodesic analysis at their Karcher mean.

pub mod pga;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm};
use crate::persistence::PersistenceDiagram;

pub use pga::{pga_fit, pga_project, PgaModel};

/// Default Gaussian variance of each diagram point (isotropic covariance).
pub const DEFAULT_VARIANCE: f64 = 0.2;

/// Tolerance on the norm of vectors handed to [`SpherePoint::new`].
const UNIT_TOLERANCE: f64 = 1e-6;

/// Square grid `[min, max]²` with uniform spacing `step`. Rows index birth,
/// columns index death.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && step.is_finite()) || max <= min || step <= 0.0 {
            return Err(Error::Argument(format!(
                "invalid grid [{min}, {max}] with step {step}"
            )));
        }
        let cells = (max - min) / step;
        if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
            return Err(Error::Argument(format!(
                "grid step {step} does not divide [{min}, {max}]"
            )));
        }
        Ok(Self { min, max, step })
    }

    /// Nodes per axis.
    pub fn side(&self) -> usize {
        ((self.max - self.min) / self.step).round() as usize + 1
    }

    /// Total node count, the ambient dimension of the embedding.
    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.min, self.max)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            min: 0.0,
            max: 530.0,
            step: 5.0,
        }
    }
}

/// Nonnegative values on a [`GridSpec`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl DensityGrid {
    /// Discrete integral `Σ values × step²`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.step * self.grid.step
    }
}

/// Below this, `exp` underflows to zero in double precision.
const EXP_FLOOR: f64 = -745.0;

/// Unnormalized mixture of `N((birth, death), variance · I)` densities over the
/// diagram's points, evaluated at the grid nodes. Points (and infinite deaths)
/// are clamped into the grid first.
///
/// Each Gaussian factors into a row profile times a column profile. Profiles
/// are shifted by their own maxima, so a point far from every node cannot
/// underflow the whole grid; if every point's peak would underflow, all are
/// rescaled by the largest peak instead (a common factor, removed by
/// normalization).
pub fn mixture(pd: &PersistenceDiagram, grid: &GridSpec, variance: f64) -> Vec<f64> {
    let side = grid.side();
    let mut values = vec![0.0; side * side];
    let coef = 1.0 / (2.0 * std::f64::consts::PI * variance);

    let profiles: Vec<(Profile, Profile)> = pd
        .points
        .iter()
        .map(|p| {
            (
                Profile::new(grid, grid.clamp(p.birth), variance),
                Profile::new(grid, grid.clamp(p.death), variance),
            )
        })
        .collect();
    let best = profiles
        .iter()
        .map(|(r, c)| r.peak + c.peak)
        .fold(f64::NEG_INFINITY, f64::max);
    let shift = if best < -700.0 { best } else { 0.0 };

    for (rows, cols) in &profiles {
        let scale = coef * (rows.peak + cols.peak - shift).exp();
        if scale == 0.0 {
            continue;
        }
        for (i, &wr) in rows.weights.iter().enumerate() {
            let row = &mut values[(rows.start + i) * side..(rows.start + i + 1) * side];
            let a = scale * wr;
            for (j, &wc) in cols.weights.iter().enumerate() {
                row[cols.start + j] += a * wc;
            }
        }
    }
    values
}

/// `exp(-(x - centre)² / 2v - peak)` over the nodes where it is nonzero.
struct Profile {
    start: usize,
    weights: Vec<f64>,
    /// Largest log-weight over the nodes (before the shift).
    peak: f64,
}

impl Profile {
    fn new(grid: &GridSpec, centre: f64, variance: f64) -> Self {
        let side = grid.side();
        let log_weight = |i: usize| {
            let d = grid.node(i) - centre;
            -d * d / (2.0 * variance)
        };
        let nearest = (((centre - grid.min) / grid.step).round() as usize).min(side - 1);
        let peak = log_weight(nearest);
        let mut lo = nearest;
        while lo > 0 && log_weight(lo - 1) - peak > EXP_FLOOR {
            lo -= 1;
        }
        let mut hi = nearest;
        while hi + 1 < side && log_weight(hi + 1) - peak > EXP_FLOOR {
            hi += 1;
        }
        let weights = (lo..=hi).map(|i| (log_weight(i) - peak).exp()).collect();
        Profile {
            start: lo,
            weights,
            peak,
        }
    }
}

/// Smoothed, normalized density of a diagram. An empty diagram maps to the
/// uniform density.
pub fn pd_to_density(
    pd: &PersistenceDiagram,
    grid: &GridSpec,
    variance: f64,
) -> Result<DensityGrid> {
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::Argument(format!(
            "variance must be positive, got {variance}"
        )));
    }
    let cell = grid.step * grid.step;
    let mut values = mixture(pd, grid, variance);
    let total: f64 = values.iter().sum::<f64>() * cell;
    if pd.is_empty() || total == 0.0 {
        let u = 1.0 / (values.len() as f64 * cell);
        values.iter_mut().for_each(|v| *v = u);
    } else {
        values.iter_mut().for_each(|v| *v /= total);
    }
    Ok(DensityGrid {
        grid: *grid,
        values,
    })
}

/// A unit vector. Embedded densities additionally have nonnegative entries,
/// but tangent-space reconstructions need not, so only the norm is enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    coords: Vec<f64>,
}

impl SpherePoint {
    /// Accepts vectors whose norm is within `1e-6` of one and renormalizes
    /// them exactly.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let n = norm(&coords);
        if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::Argument(format!("vector norm {n} is not 1")));
        }
        Ok(Self::rescaled(coords, n))
    }

    /// Normalizes any nonzero finite vector.
    pub fn normalize(coords: Vec<f64>) -> Result<Self> {
        let n = norm(&coords);
        if !n.is_finite() || n == 0.0 {
            return Err(Error::Argument(
                "cannot normalize a zero or non-finite vector".into(),
            ));
        }
        Ok(Self::rescaled(coords, n))
    }

    fn rescaled(mut coords: Vec<f64>, n: f64) -> Self {
        if n != 1.0 {
            coords.iter_mut().for_each(|x| *x /= n);
        }
        Self { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// Entrywise square root of `values × step²`, flattened row-major.
pub fn sqrt_embed(density: &DensityGrid) -> Result<SpherePoint> {
    let cell = density.grid.step * density.grid.step;
    let coords = density
        .values
        .iter()
        .map(|&v| {
            if v < 0.0 || !v.is_finite() {
                Err(Error::Consistency(format!(
                    "density value {v} is not a probability mass"
                )))
            } else {
                Ok((v * cell).sqrt())
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    SpherePoint::new(coords)
}

fn same_dim(x: &SpherePoint, y: &SpherePoint) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::Argument(format!(
            "sphere points differ in dimension ({} vs {})",
            x.dim(),
            y.dim()
        )));
    }
    Ok(())
}

/// Great-circle distance in radians, in `[0, π]`.
///
/// Computed as `atan2(‖y − ⟨x,y⟩x‖, ⟨x,y⟩)`, which equals the arccosine of
/// the clamped inner product but stays accurate for nearby points.
pub fn sphere_distance(x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
    same_dim(x, y)?;
    let c = dot(x.coords(), y.coords());
    let s = x
        .coords()
        .iter()
        .zip(y.coords())
        .map(|(a, b)| {
            let r = b - c * a;
            r * r
        })
        .sum::<f64>()
        .sqrt();
    Ok(s.atan2(c))
}

/// Exponential map: follow the great circle from `base` in direction `tangent`
/// for arc length `‖tangent‖`.
pub fn sphere_exp(base: &SpherePoint, tangent: &[f64]) -> Result<SpherePoint> {
    if tangent.len() != base.dim() {
        return Err(Error::Argument(
            "tangent dimension does not match base".into(),
        ));
    }
    let along = dot(base.coords(), tangent);
    let len = norm(tangent);
    if along.abs() > UNIT_TOLERANCE * (1.0 + len) {
        return Err(Error::Argument(format!(
            "vector is not tangent at base (inner product {along:e})"
        )));
    }
    let mut v = tangent.to_vec();
    axpy(-along, base.coords(), &mut v);
    let theta = norm(&v);
    if theta == 0.0 {
        return Ok(base.clone());
    }
    let (s, c) = theta.sin_cos();
    let mut out: Vec<f64> = base.coords().iter().map(|b| c * b).collect();
    axpy(s / theta, &v, &mut out);
    SpherePoint::normalize(out)
}

/// Logarithm map: the tangent vector at `base` pointing along the shortest
/// great circle to `y`, with length equal to their distance.
pub fn sphere_log(base: &SpherePoint, y: &SpherePoint) -> Result<Vec<f64>> {
    same_dim(base, y)?;
    let c = dot(base.coords(), y.coords());
    let mut u = y.coords().to_vec();
    axpy(-c, base.coords(), &mut u);
    let s = norm(&u);
    if s < 1e-12 {
        if c > 0.0 {
            return Ok(vec![0.0; base.dim()]);
        }
        return Err(Error::Antipodal);
    }
    let theta = s.atan2(c);
    let f = theta / s;
    u.iter_mut().for_each(|x| *x *= f);
    Ok(u)
}

pub const KARCHER_TOLERANCE: f64 = 1e-6;
pub const KARCHER_MAX_ITERATIONS: usize = 100;

/// Result of the Karcher-mean iteration; `converged` is false when the
/// iteration limit was reached, in which case `mean` is the last iterate.
#[derive(Debug, Clone)]
pub struct KarcherMean {
    pub mean: SpherePoint,
    pub iterations: usize,
    /// Norm of the final update step.
    pub residual: f64,
    pub converged: bool,
}

/// Samples are summed in fixed-size chunks so the result does not depend on
/// the number of worker threads.
const CHUNK: usize = 32;

/// Intrinsic mean by fixed-point iteration `m ← exp(m, mean_i log(m, p_i))`,
/// started from the normalized Euclidean mean.
pub fn karcher_mean(points: &[SpherePoint]) -> Result<KarcherMean> {
    let first = points
        .first()
        .ok_or_else(|| Error::Argument("Karcher mean of an empty set".into()))?;
    for p in points {
        same_dim(first, p)?;
    }
    let dim = first.dim();
    let mut sum = vec![0.0; dim];
    for p in points {
        axpy(1.0, p.coords(), &mut sum);
    }
    let mut mean = SpherePoint::normalize(sum)
        .map_err(|_| Error::Argument("points have a zero Euclidean mean".into()))?;

    let inv = 1.0 / points.len() as f64;
    let mut residual = f64::INFINITY;
    for it in 1..=KARCHER_MAX_ITERATIONS {
        let partials: Vec<Vec<f64>> = points
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = vec![0.0; dim];
                for p in chunk {
                    axpy(1.0, &sphere_log(&mean, p)?, &mut acc);
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        let mut step = vec![0.0; dim];
        for part in &partials {
            axpy(inv, part, &mut step);
        }
        residual = norm(&step);
        if residual < KARCHER_TOLERANCE {
            return Ok(KarcherMean {
                mean,
                iterations: it,
                residual,
                converged: true,
            });
        }
        mean = sphere_exp(&mean, &step)?;
    }
    Ok(KarcherMean {
        mean,
        iterations: KARCHER_MAX_ITERATIONS,
        residual,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persistence::PdPoint;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diagram(points: &[(f64, f64)]) -> PersistenceDiagram {
        PersistenceDiagram {
            dim: 0,
            points: points.iter().map(|&(b, d)| PdPoint::new(b, d)).collect(),
        }
    }

    fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> SpherePoint {
        SpherePoint::normalize((0..dim).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(GridSpec::new(0.0, 530.0, 0.5).unwrap().side(), 1061);
        assert_eq!(GridSpec::default().side(), 107);
        assert_eq!(GridSpec::default().len(), 11449);
        assert!(GridSpec::new(0.0, 530.0, 7.0).is_err());
        assert!(GridSpec::new(0.0, 530.0, 0.0).is_err());
    }

    #[test]
    fn single_point_peak() {
        let grid = GridSpec::new(0.0, 530.0, 0.5).unwrap();
        let v = mixture(&diagram(&[(10.0, 20.5)]), &grid, 0.2);
        let side = grid.side();
        let peak = v[20 * side + 41];
        let want = 1.0 / (2.0 * std::f64::consts::PI * 0.2);
        assert!((peak - want).abs() < 1e-12, "{peak}");
        assert!((want - 0.7957747).abs() < 1e-7);
        assert_eq!(v.iter().cloned().fold(0.0, f64::max), peak);
    }

    #[test]
    fn empty_is_uniform() {
        let grid = GridSpec::default();
        let d = pd_to_density(&PersistenceDiagram::empty(2), &grid, 0.2).unwrap();
        let u = 1.0 / (107.0 * 107.0 * 25.0);
        assert!(d.values.iter().all(|&v| v == u));
        let s = sqrt_embed(&d).unwrap();
        let c = 1.0 / 107.0;
        assert!(s.coords().iter().all(|&x| (x - c).abs() < 1e-12));
    }

    #[test]
    fn duplicates_do_not_change_the_density() {
        let grid = GridSpec::default();
        let a = pd_to_density(&diagram(&[(1.0, 2.0)]), &grid, 0.2).unwrap();
        let b = pd_to_density(&diagram(&[(1.0, 2.0), (1.0, 2.0)]), &grid, 0.2).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-15 * x.abs().max(1e-300));
        }
    }

    #[test]
    fn essential_deaths_are_clamped() {
        let grid = GridSpec::default();
        let a = pd_to_density(&diagram(&[(3.0, f64::INFINITY)]), &grid, 0.2).unwrap();
        let b = pd_to_density(&diagram(&[(3.0, 530.0)]), &grid, 0.2).unwrap();
        assert_eq!(a, b);
        assert!((a.integral() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn far_off_grid_point_still_normalizes() {
        // tiny variance: every node is thousands of standard deviations away
        let grid = GridSpec::default();
        let d = pd_to_density(&diagram(&[(2.5, 7.5)]), &grid, 1e-4).unwrap();
        assert!((d.integral() - 1.0).abs() < 1e-12);
        let side = grid.side();
        let q = 0.25;
        for idx in [1, 2, side + 1, side + 2] {
            assert!((d.values[idx] * 25.0 - q).abs() < 1e-12);
        }
    }

    #[test]
    fn distant_points_are_nearly_orthogonal() {
        let grid = GridSpec::new(0.0, 530.0, 0.5).unwrap();
        let a = sqrt_embed(&pd_to_density(&diagram(&[(10.0, 40.0)]), &grid, 0.2).unwrap()).unwrap();
        let b = sqrt_embed(&pd_to_density(&diagram(&[(10.0, 50.0)]), &grid, 0.2).unwrap()).unwrap();
        assert!(dot(a.coords(), b.coords()) < 1e-6);
        assert!((norm(a.coords()) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn moved_point_changes_embedding() {
        let grid = GridSpec::default();
        let e = |pts: &[(f64, f64)]| {
            sqrt_embed(&pd_to_density(&diagram(pts), &grid, 0.2).unwrap()).unwrap()
        };
        let a = e(&[(0.0, 30.0), (5.0, 100.0)]);
        let b = e(&[(0.0, 30.0), (5.0, 125.0)]);
        assert!(sphere_distance(&a, &b).unwrap() > 0.0);
    }

    #[test]
    fn negative_density_is_rejected() {
        let d = DensityGrid {
            grid: GridSpec::new(0.0, 1.0, 1.0).unwrap(),
            values: vec![0.5, 0.5, 0.5, -0.5],
        };
        assert!(matches!(sqrt_embed(&d), Err(Error::Consistency(_))));
    }

    #[test]
    fn distance_examples() {
        let x = SpherePoint::new(vec![1.0, 0.0, 0.0]).unwrap();
        let y = SpherePoint::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(sphere_distance(&x, &x).unwrap(), 0.0);
        assert!((sphere_distance(&x, &y).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let z = SpherePoint::new(vec![-1.0, 0.0, 0.0]).unwrap();
        assert!((sphere_distance(&x, &z).unwrap() - std::f64::consts::PI).abs() < 1e-15);
        assert!(SpherePoint::new(vec![1.0, 1.0]).is_err());
        let w = SpherePoint::new(vec![1.0, 0.0]).unwrap();
        assert!(sphere_distance(&x, &w).is_err());
    }

    #[test]
    fn exp_log_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_point(&mut rng, 6);
        assert!(sphere_log(&b, &b).unwrap().iter().all(|&x| x == 0.0));
        assert_eq!(sphere_exp(&b, &[0.0; 6]).unwrap(), b);
        let y = random_point(&mut rng, 6);
        let v = sphere_log(&b, &y).unwrap();
        assert!((norm(&v) - sphere_distance(&b, &y).unwrap()).abs() < 1e-12);
        let back = sphere_exp(&b, &v).unwrap();
        assert!(sphere_distance(&back, &y).unwrap() < 1e-9);
        let anti = SpherePoint::new(b.coords().iter().map(|x| -x).collect()).unwrap();
        assert!(matches!(sphere_log(&b, &anti), Err(Error::Antipodal)));
        assert!(sphere_exp(&b, b.coords()).is_err());
    }

    #[test]
    fn karcher_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_point(&mut rng, 8);
        let y = random_point(&mut rng, 8);

        let m = karcher_mean(&[x.clone(), x.clone(), x.clone()]).unwrap();
        assert!(m.converged);
        assert!(sphere_distance(&m.mean, &x).unwrap() < 1e-12);

        let m = karcher_mean(&[x.clone(), y.clone()]).unwrap();
        let (dx, dy) = (
            sphere_distance(&m.mean, &x).unwrap(),
            sphere_distance(&m.mean, &y).unwrap(),
        );
        assert!((dx - dy).abs() < 1e-6);
        assert!((dx + dy - sphere_distance(&x, &y).unwrap()).abs() < 1e-6);

        let m = karcher_mean(&[x.clone(), x.clone(), y.clone()]).unwrap();
        assert!(sphere_distance(&m.mean, &x).unwrap() < sphere_distance(&m.mean, &y).unwrap());
        assert!(karcher_mean(&[]).is_err());
    }
}
