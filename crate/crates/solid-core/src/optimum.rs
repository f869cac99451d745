//! Maximizer estimation: bounded multi-start gradient ascent, per-draw
//! maximizers, and the marginal (draw-averaged) maximizer over a restricted
//! region.

use crate::design::Design;
use crate::gp::{marginal_surface, FittedSurface};
use crate::region::SearchRegion;

pub const DEFAULT_MAX_ITERS: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-6;

/// A box-constrained maximization problem with supplied starts.
pub struct BoxOptProblem<'a> {
    pub objective: &'a dyn Fn(&[f64]) -> f64,
    pub gradient: &'a dyn Fn(&[f64]) -> Vec<f64>,
    pub region: SearchRegion,
    pub starts: Vec<Vec<f64>>,
}

/// Projected gradient ascent with backtracking from every start; returns the
/// best local optimum found. Fixed coordinates are held exactly at their
/// pins the whole way.
pub fn maximize_in_box(
    problem: &BoxOptProblem,
    max_iters: usize,
    tol: f64,
) -> (Vec<f64>, f64) {
    assert!(!problem.starts.is_empty(), "at least one start required");
    let region = &problem.region;
    let mut best: Option<(Vec<f64>, f64)> = None;

    for start in &problem.starts {
        let mut x = region.clamp(start);
        let mut fx = (problem.objective)(&x);
        let mut step = 0.1;
        for _ in 0..max_iters {
            let mut g = (problem.gradient)(&x);
            for k in 0..x.len() {
                if region.is_fixed(k) {
                    g[k] = 0.0;
                }
            }
            let gnorm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gnorm < 1e-14 {
                break;
            }
            // Backtracking line search with a light Armijo condition.
            let mut accepted = false;
            let mut t = step;
            for _ in 0..40 {
                let cand: Vec<f64> = region.clamp(
                    &x.iter()
                        .zip(&g)
                        .map(|(&xi, &gi)| xi + t * gi)
                        .collect::<Vec<f64>>(),
                );
                let move_norm: f64 = cand
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if move_norm < tol {
                    break;
                }
                let fc = (problem.objective)(&cand);
                let ascent: f64 = cand
                    .iter()
                    .zip(&x)
                    .zip(&g)
                    .map(|((c, xi), gi)| (c - xi) * gi)
                    .sum();
                if fc > fx + 1e-4 * ascent.max(0.0) && fc > fx {
                    x = cand;
                    fx = fc;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
            step = (t * 2.0).min(1.0);
        }
        match &best {
            Some((_, bf)) if *bf >= fx => {}
            _ => best = Some((x, fx)),
        }
    }
    best.unwrap()
}

/// The design rows with the largest observed responses, for multi-starting.
pub fn top_response_rows(design: &Design, count: usize) -> Vec<Vec<f64>> {
    let mut idx: Vec<usize> = (0..design.n()).collect();
    idx.sort_by(|&a, &b| design.y[b].partial_cmp(&design.y[a]).unwrap());
    idx.into_iter()
        .take(count)
        .map(|i| design.row(i))
        .collect()
}

/// Per-draw maximizer of the predictive mean over the full current box.
pub fn estimate_chi_t(
    surface: &FittedSurface,
    prev_chi: Option<&[f64]>,
    design: &Design,
) -> Vec<f64> {
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(prev) = prev_chi {
        starts.push(prev.to_vec());
    }
    starts.extend(top_response_rows(design, 4));
    let objective = |x: &[f64]| surface.predict(x).0;
    let gradient = |x: &[f64]| surface.predict_gradients(x).0;
    let problem = BoxOptProblem {
        objective: &objective,
        gradient: &gradient,
        region: SearchRegion::full_box(design.p()),
        starts,
    };
    maximize_in_box(&problem, DEFAULT_MAX_ITERS, DEFAULT_TOL).0
}

/// Maximizer of the marginal surface restricted to `region`, with the same
/// multi-start rule as the per-draw search.
pub fn estimate_chi_marginal(
    draws: &[&FittedSurface],
    design: &Design,
    region: &SearchRegion,
    prev_chi: Option<&[f64]>,
) -> Vec<f64> {
    assert!(!draws.is_empty());
    if region.free_dims().is_empty() {
        return region.center();
    }
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(prev) = prev_chi {
        starts.push(prev.to_vec());
    }
    starts.extend(top_response_rows(design, 4));
    let objective = |x: &[f64]| crate::gp::marginal_mean(draws, x);
    let gradient = |x: &[f64]| marginal_surface(draws, x).1;
    let problem = BoxOptProblem {
        objective: &objective,
        gradient: &gradient,
        region: region.clone(),
        starts,
    };
    maximize_in_box(&problem, DEFAULT_MAX_ITERS, DEFAULT_TOL).0
}
