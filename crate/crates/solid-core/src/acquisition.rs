//! Expected improvement and its augmented variant, incumbent selection,
//! restricted/unrestricted candidate sets, and gradient-directed line-search
//! maximization of AEI.

use rand::Rng;

use crate::design::{maximin_lhs, rescale_to_box, Design};
use crate::gp::{marginal_mean_var, marginal_mean_var_grads, FittedSurface};
use crate::region::{RegionDim, SearchRegion};
use crate::stats::{norm_cdf, norm_pdf};
use crate::Result;

/// Restarts used for candidate-set Latin hypercubes; cheaper than the
/// initial-design default because candidate sets are rebuilt every step.
const CANDIDATE_LHS_RESTARTS: usize = 20;

/// Where a candidate set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateOrigin {
    Restricted,
    Unrestricted,
}

#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub points: Vec<Vec<f64>>,
    pub origin: CandidateOrigin,
    /// AEI per point; empty until evaluated.
    pub aei: Vec<f64>,
}

impl CandidateSet {
    pub fn best(&self) -> Option<(usize, f64)> {
        self.aei
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, &v)| (i, v))
    }
}

/// Risk-adjusted incumbent: the design row maximizing `fhat - nu * s` under
/// the marginal surface. Ties break toward the earlier row.
pub fn select_incumbent(
    draws: &[&FittedSurface],
    design: &Design,
    nu: f64,
) -> (usize, f64) {
    assert!(design.n() > 0);
    assert!(nu >= 0.0);
    let mut best_idx = 0;
    let mut best_score = f64::NEG_INFINITY;
    let mut best_fhat = 0.0;
    for i in 0..design.n() {
        let row = design.row(i);
        let (mean, var) = marginal_mean_var(draws, &row);
        let score = mean - nu * var.sqrt();
        if score > best_score {
            best_score = score;
            best_idx = i;
            best_fhat = mean;
        }
    }
    (best_idx, best_fhat)
}

/// Closed-form expected improvement for maximization.
pub fn ei(mean: f64, sd: f64, incumbent: f64) -> f64 {
    assert!(sd >= 0.0);
    if sd == 0.0 {
        return (mean - incumbent).max(0.0);
    }
    let z = (mean - incumbent) / sd;
    (sd * (z * norm_cdf(z) + norm_pdf(z))).max(0.0)
}

/// EI times the noise-augmentation factor `1 - tau / sqrt(s^2 + tau^2)`.
pub fn aei(
    x: &[f64],
    draws: &[&FittedSurface],
    incumbent_fhat: f64,
    tau: f64,
) -> f64 {
    assert!(tau >= 0.0);
    let (mean, var) = marginal_mean_var(draws, x);
    let sd = var.sqrt();
    let augment = if tau == 0.0 {
        1.0
    } else {
        1.0 - tau / (var + tau * tau).sqrt()
    };
    ei(mean, sd, incumbent_fhat) * augment
}

/// Analytic gradient of AEI; components outside the active set are zero.
pub fn aei_gradient(
    x: &[f64],
    draws: &[&FittedSurface],
    incumbent_fhat: f64,
    tau: f64,
    active: &[bool],
) -> Vec<f64> {
    let p = x.len();
    let (mean, var, dmean, dvar) = marginal_mean_var_grads(draws, x);
    let sd = var.sqrt();
    let mut grad = vec![0.0; p];
    if sd <= 0.0 {
        return grad;
    }
    let z = (mean - incumbent_fhat) / sd;
    let ei_val = sd * (z * norm_cdf(z) + norm_pdf(z));
    // dEI = Phi(z) dmean + phi(z) dsd; dsd = dvar / (2 sd).
    let (augment, daug_dvar) = if tau == 0.0 {
        (1.0, 0.0)
    } else {
        let t2 = var + tau * tau;
        (1.0 - tau / t2.sqrt(), 0.5 * tau / t2.powf(1.5))
    };
    for k in 0..p {
        if !active[k] {
            continue;
        }
        let dsd = dvar[k] / (2.0 * sd);
        let dei = norm_cdf(z) * dmean[k] + norm_pdf(z) * dsd;
        grad[k] = dei * augment + ei_val * daug_dvar * dvar[k];
    }
    grad
}

/// `R^delta`: per active dimension, the spread of the per-draw maximizers
/// widened by `delta` and clipped to `[0, 1]`; inactive dimensions pinned at
/// the marginal maximizer.
pub fn build_restricted_region(
    chi_draws: &[Vec<f64>],
    delta: f64,
    chi_hat: &[f64],
    active: &[bool],
) -> SearchRegion {
    assert!(!chi_draws.is_empty());
    let p = chi_hat.len();
    let dims = (0..p)
        .map(|k| {
            if active[k] {
                let lo = chi_draws
                    .iter()
                    .map(|c| c[k])
                    .fold(f64::INFINITY, f64::min);
                let hi = chi_draws
                    .iter()
                    .map(|c| c[k])
                    .fold(f64::NEG_INFINITY, f64::max);
                RegionDim::Interval {
                    lo: (lo - delta).max(0.0),
                    hi: (hi + delta).min(1.0),
                }
            } else {
                RegionDim::Fixed(chi_hat[k])
            }
        })
        .collect();
    SearchRegion::new(dims)
}

/// `R^A`: the full `[0, 1]` range on active dimensions, pins elsewhere.
pub fn build_active_region(chi_hat: &[f64], active: &[bool]) -> SearchRegion {
    let dims = chi_hat
        .iter()
        .zip(active)
        .map(|(&chi, &a)| {
            if a {
                RegionDim::Interval { lo: 0.0, hi: 1.0 }
            } else {
                RegionDim::Fixed(chi)
            }
        })
        .collect();
    SearchRegion::new(dims)
}

/// Maximin LHS over the interval dimensions of `region`, with pinned
/// dimensions broadcast as constant columns.
pub fn build_candidates<R: Rng + ?Sized>(
    region: &SearchRegion,
    c: usize,
    origin: CandidateOrigin,
    rng: &mut R,
) -> Result<CandidateSet> {
    let free = region.free_dims();
    if free.is_empty() {
        return Ok(CandidateSet {
            points: vec![region.center()],
            origin,
            aei: Vec::new(),
        });
    }
    let lhs = maximin_lhs(c, free.len(), CANDIDATE_LHS_RESTARTS, rng)?;
    let lower: Vec<f64> = free
        .iter()
        .map(|&k| match region.dim(k) {
            RegionDim::Interval { lo, .. } => lo,
            RegionDim::Fixed(_) => unreachable!(),
        })
        .collect();
    let upper: Vec<f64> = free
        .iter()
        .map(|&k| match region.dim(k) {
            RegionDim::Interval { hi, .. } => hi,
            RegionDim::Fixed(_) => unreachable!(),
        })
        .collect();
    let scaled = rescale_to_box(&lhs, &lower, &upper)?;
    let template = region.center();
    let points = (0..c)
        .map(|i| {
            let mut pt = template.clone();
            for (j, &k) in free.iter().enumerate() {
                pt[k] = scaled.points()[(i, j)];
            }
            pt
        })
        .collect();
    Ok(CandidateSet {
        points,
        origin,
        aei: Vec::new(),
    })
}

/// Fills in the AEI column of a candidate set.
pub fn evaluate_aei(
    set: &mut CandidateSet,
    draws: &[&FittedSurface],
    incumbent_fhat: f64,
    tau: f64,
) {
    set.aei = set
        .points
        .iter()
        .map(|x| aei(x, draws, incumbent_fhat, tau))
        .collect();
}

/// The set containing the single largest AEI value wins; ties go to the
/// restricted set.
pub fn choose_candidate_set(restricted: CandidateSet, unrestricted: CandidateSet) -> CandidateSet {
    let r_best = restricted.best().map(|(_, v)| v).unwrap_or(f64::NEG_INFINITY);
    let u_best = unrestricted
        .best()
        .map(|(_, v)| v)
        .unwrap_or(f64::NEG_INFINITY);
    if u_best > r_best {
        unrestricted
    } else {
        restricted
    }
}

const LINE_SEARCH_STARTS: usize = 5;
const LINE_SEARCHES_PER_START: usize = 5;
const GOLDEN_EVALS: usize = 30;

fn golden_section_max(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, evals: usize) -> (f64, f64) {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = lo;
    let mut b = hi;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = if fc > fd { (c, fc) } else { (d, fd) };
    for _ in 0..evals.saturating_sub(2) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
            if fc > best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
            if fd > best.1 {
                best = (d, fd);
            }
        }
    }
    // Endpoints are attainable too.
    let f_lo = f(lo);
    if f_lo > best.1 {
        best = (lo, f_lo);
    }
    best
}

/// Clamps a step to the unit cube and the delta-ball around the trajectory
/// origin.
fn confine(
    from: &[f64],
    grad: &[f64],
    t: f64,
    origin: &[f64],
    delta: f64,
) -> Vec<f64> {
    let mut pt: Vec<f64> = from
        .iter()
        .zip(grad)
        .map(|(&x, &g)| (x + t * g).clamp(0.0, 1.0))
        .collect();
    let dist: f64 = pt
        .iter()
        .zip(origin)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if dist > delta {
        // Pull back along the segment from `from` toward `pt` until the
        // trajectory re-enters the ball.
        let mut lo = 0.0;
        let mut hi = 1.0;
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            let cand: Vec<f64> = from
                .iter()
                .zip(&pt)
                .map(|(&a, &b)| a + mid * (b - a))
                .collect();
            let d: f64 = cand
                .iter()
                .zip(origin)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if d > delta {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        pt = from
            .iter()
            .zip(&pt)
            .map(|(&a, &b)| a + lo * (b - a))
            .collect();
    }
    pt
}

/// Gradient-directed refinement of the best candidates: five successive
/// golden-section line searches from each of the top five candidates, the
/// whole trajectory confined to a Euclidean ball of radius `delta` around
/// its start. Boundary-clamped coordinates get their gradient component
/// zeroed; never returns a point worse than the best raw candidate.
pub fn line_search_maximize(
    cands: &CandidateSet,
    delta: f64,
    active: &[bool],
    aei_fn: &dyn Fn(&[f64]) -> f64,
    grad_fn: &dyn Fn(&[f64]) -> Vec<f64>,
) -> Vec<f64> {
    assert!(!cands.points.is_empty());
    assert_eq!(cands.aei.len(), cands.points.len(), "evaluate AEI first");
    let mut order: Vec<usize> = (0..cands.points.len()).collect();
    order.sort_by(|&a, &b| cands.aei[b].partial_cmp(&cands.aei[a]).unwrap());

    let (best_idx, best_raw) = cands.best().unwrap();
    let mut best_point = cands.points[best_idx].clone();
    let mut best_val = best_raw;

    for &start_idx in order.iter().take(LINE_SEARCH_STARTS) {
        let origin = cands.points[start_idx].clone();
        let mut x = origin.clone();
        let mut fx = cands.aei[start_idx];
        for _ in 0..LINE_SEARCHES_PER_START {
            let mut g = grad_fn(&x);
            for k in 0..x.len() {
                if !active[k] {
                    g[k] = 0.0;
                }
                // Boundary rule: a coordinate sitting on the wall with the
                // gradient pointing outward stays put.
                if (x[k] <= 0.0 && g[k] < 0.0) || (x[k] >= 1.0 && g[k] > 0.0) {
                    g[k] = 0.0;
                }
            }
            let gnorm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gnorm < 1e-14 {
                break;
            }
            let tmax = delta / gnorm;
            let phi = |t: f64| aei_fn(&confine(&x, &g, t, &origin, delta));
            let (t_best, f_best) = golden_section_max(&phi, 0.0, tmax, GOLDEN_EVALS);
            if f_best <= fx {
                break;
            }
            x = confine(&x, &g, t_best, &origin, delta);
            fx = f_best;
        }
        if fx > best_val {
            best_val = fx;
            best_point = x;
        }
    }
    best_point
}
