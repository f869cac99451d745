//! Benchmark objectives: four synthetic test functions, a noisy evaluation
//! wrapper, and a Nadaraya-Watson smoother over a user-supplied dataset with
//! cross-validated bandwidth.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::stats::{norm_cdf, norm_pdf};
use crate::{Error, Result};

/// Maximizer and function value there. Values frozen from this
/// transcription and cross-checked against an independent one (scipy),
/// agreeing to 1e-9 absolute.
pub const TOY_MAX: (&[f64], f64) = (&[1.0, 1.0], 9.999999989303937);
pub const BEACH_MAX: (&[f64], f64) = (&[1.0, 0.85, 1.0, 0.0, 0.0, 0.0], 9.999999640364253);
pub const DRUM_MAX: (&[f64], f64) = (&[0.368, 0.533, 0.0, 1.0, 0.555, 1.0], 9.999992162029837);
pub const SIMBA_MAX: (&[f64], f64) = (
    &[0.523, 0.0999, 0.0, 0.298, 0.298, 0.245],
    10.034223026441607,
);

fn pnorm(z: f64) -> f64 {
    norm_cdf(z)
}

fn pnorm_sd(z: f64, sd: f64) -> f64 {
    norm_cdf(z / sd)
}

/// Two-dimensional toy surface with two ridges meeting near (1, 1).
pub fn toy_f(x: &[f64]) -> f64 {
    assert!(x.len() >= 2, "toy requires at least 2 dimensions");
    let (x1, x2) = (x[0], x[1]);
    10.0 * x2 * x2 * pnorm(10.0 * (x1 - 0.4))
        + (5.0 * PI * (x2 - x1 * x1) - x1 * x2).sin() * pnorm(10.0 * (0.4 - x1))
}

/// Concentric ringed surface in six dimensions, affinely normalized so the
/// maximum sits near 10.
pub fn drum_f(x: &[f64]) -> f64 {
    assert!(x.len() >= 6, "drum requires at least 6 dimensions");
    let (x1, x2, x3, x4, x5, x6) = (x[0], x[1], x[2], x[3], x[4], x[5]);
    let r2 = (x1 - 0.5) * (x1 - 0.5) + (x2 - 0.5) * (x2 - 0.5);

    let inner = (6.0 - x3 / 4.0)
        * (4.0 * PI * (x3 - 0.5)).cos()
        * norm_pdf(11.0 * (r2 + 0.25) * (r2 + 0.25))
        * (1.0 - 3.0 * (x1 - 0.3) * (x1 - 0.3));

    let middl = (1.0 + 2.0 * x4)
        * (2.0 * PI * x4 * (x5 - 0.3)).sin()
        * (pnorm(6.0 * (r2 - 0.13)) * pnorm(-8.0 * (r2 - 0.11)))
        * (1.0 + x4 * x4 + x5 * x5 * (x2 - 0.2));

    let outer = (1.0 - 2.0 * x5)
        * (2.0 * PI * x5 * (x4 + 0.5)).cos()
        * pnorm(8.0 * (r2 - 0.2))
        * (1.0 - x6 * x6 - x5 * x5 * (x1 + 0.2));

    (inner + middl + outer) * (10.0 / 2.032078) - 4.4831
}

/// Shoreline surface: bump field plus two plateaus, blended by smoothed
/// indicators whose sharpness varies with position.
pub fn beach_f(x: &[f64]) -> f64 {
    assert!(x.len() >= 6, "beach requires at least 6 dimensions");
    let (x1, x2, x3, x4, x5, x6) = (x[0], x[1], x[2], x[3], x[4], x[5]);
    let sdz = 0.2 + (2.0 + x6 + x5 - 1.5 * x1) * (3.0 + x4 - x3 - x2) / 12.0;

    let bumps = (5.0 * (6.0 * PI * x1 * x6).sin() * (x3 * x3 + 1.0)
        - (x2 * x2 + 4.0 - x1 * x2 / (x3 - 7.0) + x4 * (x5 - 0.3)).powi(2)
            * (4.0 * PI * x1 * x3 * x3).cos().powi(10)
            * (x1 * x2 * x2 - 0.5)
            * (x2 * x6 - 0.5)
            * (x5 - 0.5))
        * (pnorm_sd(10.0 * (0.8 - x3), sdz)
            * pnorm_sd(x1 - 0.1, sdz)
            * pnorm_sd(x2 - 0.1, 2.0 * sdz));

    let horiz = (10.5 - 30.0 * (x1 - 0.3) * (x1 - 0.3))
        * (pnorm_sd(0.2 - x3, sdz) * pnorm_sd(10.0 * (0.3 - x2), sdz));

    let vert = (10.5 - 30.0 * (x2 - 0.85) * (x2 - 0.85))
        * (pnorm_sd(5.0 * (x3 - 0.8), sdz) * pnorm_sd(10.0 * (x1 - 0.8), sdz));

    bumps + horiz + vert - 0.97013 + 0.470418
}

/// Six-dimensional surface with several interacting regimes gated by
/// normal-CDF switches, including one nested inside another.
pub fn simba_f(x: &[f64]) -> f64 {
    assert!(x.len() >= 6, "simba requires at least 6 dimensions");
    let (x1, x2, x3, x4, x5, x6) = (x[0], x[1], x[2], x[3], x[4], x[5]);

    3.14749
        + (2.0 * PI * (x1 * x1 - 2.0 * x2 * (1.0 + x3))).sin()
            * (pnorm(30.0 * (x2 - 0.3)) + pnorm(30.0 * (0.8 - x2)) - 1.0)
            * 2.0
            * (4.0 * PI * x1
                + 3.0 * PI * (1.0 + x3)
                + 2.0 * PI * (x4 + x5)
                + 3.0 * PI * (1.0 + x6))
                .sin()
        + (4.0 + 6.0 * x1)
            * (pnorm(30.0 * x2) + pnorm(30.0 * (0.2 - x2)) - 1.0)
            * (pnorm(30.0 * x1) + pnorm(30.0 * (0.6 - x1)) - 1.0)
            * pnorm(10.0 * (0.2 - x3))
        + (1.0 - 8.0 * (x1 + x2 - x4 - x5 - x6).powi(2))
            * (pnorm(40.0 * x2) + pnorm(40.0 * (0.2 - x2)) - 1.0)
            * (pnorm(40.0 * (x1 - 0.6)) + pnorm(40.0 * (1.0 - x1)) - 1.0)
            * pnorm(10.0 * (0.2 - x3))
        + 0.5
            * (1.0 - (8.0 * PI * x1 + 7.0 * PI * x2 * x3 - 4.0 * PI * x4 * x5 * x6).sin())
            * (pnorm(30.0 * x2) + pnorm(30.0 * (0.3 - x2)) - 1.0)
            * pnorm(8.0 * (x3 - 0.3))
        + (5.0 * (2.0 * (x2 + 0.5) * (-x4 + 0.5) * (-x5 + 0.5) * (-x5 + 0.5)).cos()
            * (-x6 - 0.5)
            - 0.02
                * ((1.0 - x2) * (1.0 - x2)
                    + (1.0 - x1) * (1.0 - x1)
                    + (1.0 - x3 - 0.3 * x4) * (1.0 - x3 - 0.3 * x4)
                    + (1.0 - x5 + 0.5 * x4) * (1.0 - x5 + 0.5 * x4)
                    + (0.8 - x6 - 0.4 * x4) * (0.8 - x6 - 0.4 * x4)))
            * pnorm(5.0 * (x2 - 1.0) + pnorm(10.0 * (0.5 - x3)))
}

enum Eval {
    /// Closed-form function reading its first `req` coordinates.
    Analytic { f: fn(&[f64]) -> f64, req: usize },
    Dataset(SmoothedDataset),
}

/// A black-box objective on `[0, 1]^p0`: deterministic surface plus optional
/// Gaussian observation noise.
pub struct Objective {
    pub name: String,
    pub p0: usize,
    /// Truly active coordinate indices; everything else is exactly ignored.
    pub active: Vec<usize>,
    pub noise_var: f64,
    /// (argmax embedded in p0 dims, noiseless value there), when known.
    pub known_max: Option<(Vec<f64>, f64)>,
    eval: Eval,
}

impl Objective {
    fn analytic(
        name: &str,
        f: fn(&[f64]) -> f64,
        req: usize,
        p0: usize,
        noise_var: f64,
        max: (&[f64], f64),
    ) -> Result<Self> {
        if p0 < req {
            return Err(Error::invalid(format!(
                "{name} needs at least {req} dimensions, got p0 = {p0}"
            )));
        }
        if noise_var < 0.0 {
            return Err(Error::invalid("noise variance must be >= 0"));
        }
        let mut chi = vec![0.5; p0];
        chi[..req].copy_from_slice(max.0);
        Ok(Self {
            name: name.to_string(),
            p0,
            active: (0..req).collect(),
            noise_var,
            known_max: Some((chi, max.1)),
            eval: Eval::Analytic { f, req },
        })
    }

    pub fn toy(p0: usize, noise_var: f64) -> Result<Self> {
        Self::analytic("toy", toy_f, 2, p0, noise_var, TOY_MAX)
    }

    pub fn beach(p0: usize, noise_var: f64) -> Result<Self> {
        Self::analytic("beach", beach_f, 6, p0, noise_var, BEACH_MAX)
    }

    pub fn drum(p0: usize, noise_var: f64) -> Result<Self> {
        Self::analytic("drum", drum_f, 6, p0, noise_var, DRUM_MAX)
    }

    pub fn simba(p0: usize, noise_var: f64) -> Result<Self> {
        Self::analytic("simba", simba_f, 6, p0, noise_var, SIMBA_MAX)
    }

    pub fn by_name(name: &str, p0: usize, noise_var: f64) -> Result<Self> {
        match name {
            "toy" => Self::toy(p0, noise_var),
            "beach" => Self::beach(p0, noise_var),
            "drum" => Self::drum(p0, noise_var),
            "simba" => Self::simba(p0, noise_var),
            other => Err(Error::invalid(format!("unknown objective '{other}'"))),
        }
    }

    /// Treats a smoothed dataset as the objective; every column is active.
    pub fn from_dataset(name: &str, data: SmoothedDataset, noise_var: f64) -> Self {
        let p0 = data.inputs.ncols();
        Self {
            name: name.to_string(),
            p0,
            active: (0..p0).collect(),
            noise_var,
            known_max: None,
            eval: Eval::Dataset(data),
        }
    }

    /// Noiseless objective value.
    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.p0, "objective expects {} dims", self.p0);
        match &self.eval {
            Eval::Analytic { f, req } => f(&x[..*req]),
            Eval::Dataset(data) => smoothed_objective(data, x),
        }
    }
}

/// Objective value plus a Normal(0, noise_var) draw.
pub fn noisy_eval<R: Rng + ?Sized>(obj: &Objective, x: &[f64], rng: &mut R) -> f64 {
    let f = obj.eval(x);
    if obj.noise_var == 0.0 {
        f
    } else {
        f + Normal::new(0.0, obj.noise_var.sqrt()).unwrap().sample(rng)
    }
}

/// Observed inputs (scaled to the unit cube), responses, and a smoothing
/// bandwidth shared across coordinates.
pub struct SmoothedDataset {
    pub inputs: DMatrix<f64>,
    pub responses: DVector<f64>,
    pub bandwidth: f64,
}

impl SmoothedDataset {
    pub fn new(inputs: DMatrix<f64>, responses: DVector<f64>, bandwidth: f64) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::Dataset("dataset is empty".into()));
        }
        if inputs.nrows() != responses.len() {
            return Err(Error::Dataset(format!(
                "{} input rows but {} responses",
                inputs.nrows(),
                responses.len()
            )));
        }
        if !(bandwidth > 0.0) {
            return Err(Error::Dataset("bandwidth must be positive".into()));
        }
        Ok(Self {
            inputs,
            responses,
            bandwidth,
        })
    }
}

fn nw_predict(
    inputs: &DMatrix<f64>,
    responses: &DVector<f64>,
    rows: &[usize],
    x: &[f64],
    h: f64,
) -> f64 {
    let inv_h2 = 1.0 / (h * h);
    // Subtract the per-query max exponent so at least one weight is exactly 1
    // and the denominator never underflows to zero.
    let mut exps = Vec::with_capacity(rows.len());
    let mut max_e = f64::NEG_INFINITY;
    for &i in rows {
        let mut d2 = 0.0;
        for j in 0..x.len() {
            let d = inputs[(i, j)] - x[j];
            d2 += d * d;
        }
        let e = -inv_h2 * d2;
        max_e = max_e.max(e);
        exps.push(e);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (idx, &i) in rows.iter().enumerate() {
        let w = (exps[idx] - max_e).exp();
        num += w * responses[i];
        den += w;
    }
    num / den
}

/// Nadaraya-Watson estimate at `x`: weighted mean of the responses with
/// weights exp{-h^-2 Σ_j (x_j - x'_j)^2}.
pub fn smoothed_objective(data: &SmoothedDataset, x: &[f64]) -> f64 {
    assert_eq!(x.len(), data.inputs.ncols());
    let rows: Vec<usize> = (0..data.inputs.nrows()).collect();
    nw_predict(&data.inputs, &data.responses, &rows, x, data.bandwidth)
}

/// Picks the grid bandwidth minimizing out-of-fold squared prediction error.
/// Folds are a seeded shuffle, so the result is reproducible.
pub fn cv_bandwidth(
    inputs: &DMatrix<f64>,
    responses: &DVector<f64>,
    folds: usize,
    grid: &[f64],
    seed: u64,
) -> Result<f64> {
    if folds < 2 {
        return Err(Error::invalid("need at least 2 folds"));
    }
    if grid.is_empty() {
        return Err(Error::invalid("bandwidth grid is empty"));
    }
    let n = inputs.nrows();
    if n < folds {
        return Err(Error::Dataset(format!("{n} rows cannot fill {folds} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let assignment: Vec<usize> = {
        let mut a = vec![0; n];
        for (pos, &row) in order.iter().enumerate() {
            a[row] = pos % folds;
        }
        a
    };

    let mut best_h = grid[0];
    let mut best_mse = f64::INFINITY;
    for &h in grid {
        if !(h > 0.0) {
            return Err(Error::invalid("bandwidths must be positive"));
        }
        let mut sse = 0.0;
        for fold in 0..folds {
            let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != fold).collect();
            for i in (0..n).filter(|&i| assignment[i] == fold) {
                let x: Vec<f64> = (0..inputs.ncols()).map(|j| inputs[(i, j)]).collect();
                let pred = nw_predict(inputs, responses, &train, &x, h);
                sse += (pred - responses[i]) * (pred - responses[i]);
            }
        }
        let mse = sse / n as f64;
        if mse < best_mse {
            best_mse = mse;
            best_h = h;
        }
    }
    Ok(best_h)
}

/// Reads delimiter-separated text (comma or whitespace, optional header):
/// p input columns then one response. Inputs are min-max scaled to `[0, 1]`
/// per column.
pub fn load_dataset(path: &Path) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Dataset(format!("cannot read {}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = if line.contains(',') {
            line.split(',').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(vals) => {
                if vals.len() < 2 {
                    return Err(Error::Dataset(format!(
                        "line {}: need at least one input column and a response",
                        lineno + 1
                    )));
                }
                if let Some(first) = rows.first() {
                    if vals.len() != first.len() {
                        return Err(Error::Dataset(format!(
                            "line {}: expected {} columns, found {}",
                            lineno + 1,
                            first.len(),
                            vals.len()
                        )));
                    }
                }
                rows.push(vals);
            }
            // A non-numeric first line is a header; anywhere else it's an error.
            Err(_) if rows.is_empty() && lineno == 0 => continue,
            Err(e) => {
                return Err(Error::Dataset(format!("line {}: {e}", lineno + 1)));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Dataset("no data rows found".into()));
    }
    let p = rows[0].len() - 1;
    let n = rows.len();
    let mut inputs = DMatrix::zeros(n, p);
    let responses = DVector::from_fn(n, |i, _| rows[i][p]);
    for j in 0..p {
        let lo = rows.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        for i in 0..n {
            inputs[(i, j)] = if span > 0.0 {
                (rows[i][j] - lo) / span
            } else {
                0.5
            };
        }
    }
    Ok((inputs, responses))
}
