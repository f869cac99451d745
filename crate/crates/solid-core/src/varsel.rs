//! Global variable selection from posterior inclusion frequencies, and local
//! variable selection by comparing baseline predictions near the estimated
//! maximizer with the alternatives obtained by zeroing one kernel range at a
//! time.

use rand::Rng;
use rayon::prelude::*;

use crate::design::{truncated_normal_cloud, Design};
use crate::gp::{build_surface, FittedSurface, PosteriorDraws};
use crate::stats::squared_correlation;
use crate::{Error, Result};

/// Posterior inclusion probabilities and the surviving variable set.
#[derive(Debug, Clone)]
pub struct GlobalActivity {
    /// Per current column: fraction of draws with `b_k = 1`.
    pub bhat: Vec<f64>,
    pub threshold: f64,
    /// Current-column indices with `bhat_k >= threshold`.
    pub keep: Vec<usize>,
}

pub fn global_activity(draws: &PosteriorDraws, g: f64) -> GlobalActivity {
    assert!(!draws.is_empty());
    assert!(g > 0.0 && g < 1.0, "threshold g must lie in (0, 1)");
    let p = draws.draws[0].p();
    let m = draws.len() as f64;
    let bhat: Vec<f64> = (0..p)
        .map(|k| draws.draws.iter().filter(|d| d.params.b[k]).count() as f64 / m)
        .collect();
    let keep = bhat
        .iter()
        .enumerate()
        .filter_map(|(k, &b)| (b >= g).then_some(k))
        .collect();
    GlobalActivity {
        bhat,
        threshold: g,
        keep,
    }
}

/// Permanently drops globally inactive columns. Returns whether any column
/// was removed, in which case the caller must refit on the reduced design.
pub fn apply_global_selection(
    design: &Design,
    activity: &GlobalActivity,
) -> Result<(Design, bool)> {
    if activity.keep.is_empty() {
        return Err(Error::EmptyModel);
    }
    if activity.keep.len() == design.p() {
        return Ok((design.clone(), false));
    }
    let mut reduced = design.clone();
    reduced.retain_columns(&activity.keep);
    Ok((reduced, true))
}

/// Local importance of every current variable around the per-draw maximizers.
#[derive(Debug, Clone)]
pub struct LocalActivityReport {
    /// `L_k = 1 - mean_t(R^2_kt)`, one entry per current column.
    pub importance: Vec<f64>,
    pub rho: f64,
    /// Current-column indices with `L_k >= rho`.
    pub active: Vec<usize>,
    /// Per-draw squared correlations, row per draw, column per variable.
    pub r_squared: Vec<Vec<f64>>,
    /// Per-draw maximizer estimates, in current-column coordinates.
    pub chi_draws: Vec<Vec<f64>>,
}

impl LocalActivityReport {
    pub fn active_mask(&self, p: usize) -> Vec<bool> {
        let mut mask = vec![false; p];
        for &k in &self.active {
            mask[k] = true;
        }
        mask
    }
}

/// Squared correlation under the local-selection conventions: identical
/// perturbation is a perfect match, and a collapsed (constant) prediction
/// vector signals maximal importance.
fn r_squared_convention(baseline: &[f64], alternative: &[f64], perturbed: bool) -> f64 {
    if !perturbed {
        return 1.0;
    }
    squared_correlation(baseline, alternative).unwrap_or(0.0)
}

/// Runs the local-selection sweep over `m` thinned draws.
///
/// For each selected draw: estimate the per-draw maximizer with
/// `chi_estimator`, spread `q` truncated-normal prediction points around it,
/// and compare the draw's predictions with the `p` alternatives obtained by
/// zeroing each kernel range in turn.
pub fn local_importance<R, F>(
    draws: &PosteriorDraws,
    m: usize,
    delta: f64,
    q: usize,
    rho: f64,
    design: &Design,
    chi_estimator: F,
    rng: &mut R,
) -> Result<LocalActivityReport>
where
    R: Rng + ?Sized,
    F: Fn(&FittedSurface) -> Vec<f64> + Sync,
{
    if m == 0 || m > draws.len() {
        return Err(Error::invalid("need 1 <= m <= retained draws"));
    }
    if q < 3 {
        return Err(Error::invalid("need q >= 3 prediction points"));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid("rho must lie in (0, 1)"));
    }
    let p = design.p();
    let selected = draws.thin(m);

    // Clouds are drawn up front so the RNG stream is independent of the
    // parallel schedule.
    let mut clouds = Vec::with_capacity(selected.len());
    let chi_draws: Vec<Vec<f64>> = selected
        .par_iter()
        .map(|surface| chi_estimator(surface))
        .collect();
    for chi in &chi_draws {
        clouds.push(truncated_normal_cloud(chi, delta, q, rng)?);
    }

    let r_squared: Vec<Vec<f64>> = selected
        .par_iter()
        .zip(clouds.par_iter())
        .map(|(surface, cloud)| {
            let points: Vec<Vec<f64>> = (0..q)
                .map(|i| cloud.row(i).iter().copied().collect())
                .collect();
            let baseline: Vec<f64> = points.iter().map(|pt| surface.predict(pt).0).collect();
            let mut row = vec![1.0; p];
            for k in 0..p {
                let perturbed = surface.params.b[k] && surface.params.u[k] > 0.0;
                if !perturbed {
                    row[k] = 1.0;
                    continue;
                }
                let mut alt_params = surface.params.clone();
                alt_params.b[k] = false;
                let alt = build_surface(alt_params, surface.design(), surface.responses())?;
                let alt_pred: Vec<f64> = points.iter().map(|pt| alt.predict(pt).0).collect();
                row[k] = r_squared_convention(&baseline, &alt_pred, true);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    let m_eff = r_squared.len() as f64;
    let importance: Vec<f64> = (0..p)
        .map(|k| 1.0 - r_squared.iter().map(|row| row[k]).sum::<f64>() / m_eff)
        .collect();
    let active = importance
        .iter()
        .enumerate()
        .filter_map(|(k, &l)| (l >= rho).then_some(k))
        .collect();
    Ok(LocalActivityReport {
        importance,
        rho,
        active,
        r_squared,
        chi_draws,
    })
}
