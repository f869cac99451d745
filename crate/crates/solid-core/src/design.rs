//! Maximin Latin hypercube designs and truncated-normal prediction clouds.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::stats::{norm_cdf, norm_quantile};
use crate::{Error, Result};

/// An n-by-p point set with every coordinate in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    points: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        if points.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::invalid("design entries must lie in [0, 1]"));
        }
        Ok(DesignMatrix { points })
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn p(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.points.row(i).iter().copied().collect()
    }

    /// Smallest pairwise Euclidean distance; infinity for fewer than 2 rows.
    pub fn min_pairwise_distance(&self) -> f64 {
        let n = self.n();
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                let d2: f64 = (0..self.p())
                    .map(|k| {
                        let d = self.points[(i, k)] - self.points[(j, k)];
                        d * d
                    })
                    .sum();
                best = best.min(d2.sqrt());
            }
        }
        best
    }
}

/// A single random Latin hypercube: one uniform draw per stratum, columns
/// independently permuted.
fn random_lhs<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> DMatrix<f64> {
    let mut points = DMatrix::zeros(n, p);
    let mut strata: Vec<usize> = (0..n).collect();
    for k in 0..p {
        // Fisher-Yates shuffle of stratum labels.
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            strata.swap(i, j);
        }
        for i in 0..n {
            let u: f64 = rng.gen::<f64>();
            points[(i, k)] = (strata[i] as f64 + u) / n as f64;
        }
    }
    points
}

/// Best-of-`restarts` maximin Latin hypercube design.
pub fn maximin_lhs<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    restarts: usize,
    rng: &mut R,
) -> Result<DesignMatrix> {
    if n == 0 || p == 0 || restarts == 0 {
        return Err(Error::invalid("maximin_lhs requires n, p, restarts >= 1"));
    }
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    for _ in 0..restarts {
        let cand = DesignMatrix {
            points: random_lhs(n, p, rng),
        };
        let d = cand.min_pairwise_distance();
        match &best {
            Some((bd, _)) if *bd >= d => {}
            _ => best = Some((d, cand.points)),
        }
    }
    Ok(DesignMatrix {
        points: best.unwrap().1,
    })
}

/// Affine map of each column from `[0, 1]` to `[lower_k, upper_k]`.
pub fn rescale_to_box(
    design: &DesignMatrix,
    lower: &[f64],
    upper: &[f64],
) -> Result<DesignMatrix> {
    if lower.len() != design.p() || upper.len() != design.p() {
        return Err(Error::invalid("bound length must match design dimension"));
    }
    for k in 0..design.p() {
        if !(0.0 <= lower[k] && lower[k] <= upper[k] && upper[k] <= 1.0) {
            return Err(Error::invalid(format!(
                "need 0 <= lower <= upper <= 1 in dimension {k}"
            )));
        }
    }
    let mut points = design.points.clone();
    for k in 0..design.p() {
        for i in 0..design.n() {
            points[(i, k)] = lower[k] + points[(i, k)] * (upper[k] - lower[k]);
        }
    }
    Ok(DesignMatrix { points })
}

/// `q` draws with each coordinate from a normal centered at `center_k` with
/// sd `delta`, truncated to `[0, 1]` by inverse-CDF sampling.
pub fn truncated_normal_cloud<R: Rng + ?Sized>(
    center: &[f64],
    delta: f64,
    q: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if delta <= 0.0 {
        return Err(Error::invalid("truncated_normal_cloud requires delta > 0"));
    }
    if q < 2 {
        return Err(Error::invalid("truncated_normal_cloud requires q >= 2"));
    }
    let p = center.len();
    let mut points = DMatrix::zeros(q, p);
    for k in 0..p {
        let a = norm_cdf((0.0 - center[k]) / delta);
        let b = norm_cdf((1.0 - center[k]) / delta);
        for i in 0..q {
            let u: f64 = rng.gen::<f64>();
            let x = center[k] + delta * norm_quantile(a + u * (b - a));
            points[(i, k)] = x.clamp(0.0, 1.0);
        }
    }
    Ok(points)
}

/// Current design state of a sequential run: the input matrix in surviving
/// columns, observed responses, and the map from current columns back to
/// original variable indices.
#[derive(Debug, Clone)]
pub struct Design {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub col_map: Vec<usize>,
}

impl Design {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::invalid("row count of X must match length of y"));
        }
        let col_map = (0..x.ncols()).collect();
        Ok(Design { x, y, col_map })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }

    /// Appends an observation in current-column coordinates.
    pub fn push(&mut self, point: &[f64], response: f64) {
        assert_eq!(point.len(), self.p());
        let n = self.n();
        self.x = self.x.clone().insert_row(n, 0.0);
        for k in 0..self.p() {
            self.x[(n, k)] = point[k];
        }
        self.y = self.y.clone().insert_row(n, response);
    }

    /// Keeps only the given current-column indices (ascending order).
    pub fn retain_columns(&mut self, keep: &[usize]) {
        let x = DMatrix::from_fn(self.n(), keep.len(), |i, j| self.x[(i, keep[j])]);
        self.col_map = keep.iter().map(|&j| self.col_map[j]).collect();
        self.x = x;
    }

    /// Expands a current-column point to original coordinates, filling
    /// removed variables from `fill`.
    pub fn embed(&self, point: &[f64], fill: &[f64]) -> Vec<f64> {
        let mut full = fill.to_vec();
        for (j, &orig) in self.col_map.iter().enumerate() {
            full[orig] = point[j];
        }
        full
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stratification_ok(d: &DesignMatrix) -> bool {
        let n = d.n();
        (0..d.p()).all(|k| {
            let mut counts = vec![0usize; n];
            for i in 0..n {
                let s = ((d.points()[(i, k)] * n as f64).floor() as usize).min(n - 1);
                counts[s] += 1;
            }
            counts.iter().all(|&c| c == 1)
        })
    }

    #[test]
    fn single_point_lhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = maximin_lhs(1, 3, 5, &mut rng).unwrap();
        assert_eq!((d.n(), d.p()), (1, 3));
        assert!(d.points().iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn lhs_stratification_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = maximin_lhs(4, 2, 10, &mut rng).unwrap();
        assert!(stratification_ok(&d));
    }

    #[test]
    fn rejects_zero_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(maximin_lhs(0, 2, 1, &mut rng).is_err());
        assert!(maximin_lhs(2, 0, 1, &mut rng).is_err());
    }

    #[test]
    fn maximin_beats_single_random_lhs() {
        // Generate-and-compare oracle over 100 seeds.
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let best = maximin_lhs(20, 5, 50, &mut rng).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let single = maximin_lhs(20, 5, 1, &mut rng).unwrap();
            assert!(best.min_pairwise_distance() >= single.min_pairwise_distance());
        }
    }

    #[test]
    fn min_distance_monotone_in_restarts() {
        for seed in 0..20u64 {
            let mut prev = 0.0;
            for restarts in [1, 5, 25] {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let d = maximin_lhs(12, 3, restarts, &mut rng).unwrap();
                let dist = d.min_pairwise_distance();
                assert!(dist >= prev);
                prev = dist;
            }
        }
    }

    #[test]
    fn rescale_identity_and_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = maximin_lhs(5, 2, 3, &mut rng).unwrap();
        let id = rescale_to_box(&d, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(id.points(), d.points());

        let flat = rescale_to_box(&d, &[0.25, 0.25], &[0.25, 0.25]).unwrap();
        assert!(flat.points().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn rescale_affine_arithmetic() {
        let pts = DMatrix::from_column_slice(3, 1, &[0.0, 0.5, 1.0]);
        let d = DesignMatrix::new(pts).unwrap();
        let r = rescale_to_box(&d, &[0.2], &[0.6]).unwrap();
        let got: Vec<f64> = r.points().iter().copied().collect();
        for (g, e) in got.iter().zip([0.2, 0.4, 0.6]) {
            assert_relative_eq!(g, &e, epsilon = 1e-15);
        }
    }

    #[test]
    fn rescale_rejects_crossed_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = maximin_lhs(3, 1, 1, &mut rng).unwrap();
        assert!(rescale_to_box(&d, &[0.7], &[0.3]).is_err());
    }

    #[test]
    fn cloud_vanishing_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let c = [0.3, 0.6];
        let q = truncated_normal_cloud(&c, 1e-9, 10, &mut rng).unwrap();
        for i in 0..q.nrows() {
            for k in 0..2 {
                assert!((q[(i, k)] - c[k]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn cloud_stays_in_unit_cube() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &center in &[0.0, 0.05, 0.5, 0.99] {
            let q = truncated_normal_cloud(&[center; 3], 0.4, 200, &mut rng).unwrap();
            assert!(q.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn cloud_matches_analytic_truncated_std() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let q = truncated_normal_cloud(&[0.5, 0.5], 0.15, 100_000, &mut rng).unwrap();
        let (_, var) = crate::stats::truncated_normal_moments(0.5, 0.15, 0.0, 1.0);
        for k in 0..2 {
            let col: Vec<f64> = (0..q.nrows()).map(|i| q[(i, k)]).collect();
            let (_, sample_var) = crate::stats::mean_var(&col);
            assert!((sample_var.sqrt() - var.sqrt()).abs() / var.sqrt() < 0.02);
        }
    }

    #[test]
    fn cloud_rejects_bad_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert!(truncated_normal_cloud(&[0.5], 0.0, 10, &mut rng).is_err());
        assert!(truncated_normal_cloud(&[0.5], -1.0, 10, &mut rng).is_err());
    }

    #[test]
    fn design_retain_and_embed() {
        let x = DMatrix::from_row_slice(2, 3, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let y = DVector::from_vec(vec![1.0, 2.0]);
        let mut d = Design::new(x, y).unwrap();
        d.retain_columns(&[0, 1]);
        assert_eq!(d.col_map, vec![0, 1]);
        assert_eq!(d.p(), 2);
        let full = d.embed(&[0.9, 0.8], &[0.0, 0.0, 0.7]);
        assert_eq!(full, vec![0.9, 0.8, 0.7]);
    }
}
