//! End-to-end sequential optimization loop and the three baseline modes,
//! plus the relative-improvement metrics.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::acquisition::{
    aei, aei_gradient, build_active_region, build_candidates, build_restricted_region,
    choose_candidate_set, evaluate_aei, line_search_maximize, select_incumbent, CandidateOrigin,
};
use crate::design::{maximin_lhs, Design};
use crate::mcmc::{run_chain, ChainConfig, Priors};
use crate::optimum::{estimate_chi_marginal, estimate_chi_t};
use crate::region::SearchRegion;
use crate::testbed::{noisy_eval, Objective};
use crate::varsel::{apply_global_selection, global_activity, local_importance};
use crate::{Error, Result};

/// How much of the variable-selection machinery a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Global and local selection with restricted acquisition regions.
    Solid,
    /// Global selection only; full-space acquisition.
    Gvs,
    /// Design restricted a priori to the known active variables; no selection.
    Oracle,
    /// No selection of any kind.
    None,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Solid => "solid",
            Mode::Gvs => "gvs",
            Mode::Oracle => "oracle",
            Mode::None => "none",
        }
    }

    pub fn parse(s: &str) -> Result<Mode> {
        match s.to_ascii_lowercase().as_str() {
            "solid" => Ok(Mode::Solid),
            "gvs" => Ok(Mode::Gvs),
            "oracle" => Ok(Mode::Oracle),
            "none" => Ok(Mode::None),
            other => Err(Error::invalid(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    /// Initial design size.
    pub n0: usize,
    /// Number of sequential acquisitions after the initial fit.
    pub n_steps: usize,
    /// Global inclusion threshold on the posterior selection probability.
    pub g: f64,
    /// Local importance threshold.
    pub rho: f64,
    /// Region half-width, prediction-cloud spread, and line-search radius.
    pub delta: f64,
    /// Retained MCMC draws per fit (burn-in equals this).
    pub chain_m: usize,
    /// Thinned draws used for local selection, optimum estimation, and AEI.
    pub subsample_m: usize,
    /// Prediction-cloud size per draw.
    pub q: usize,
    /// Candidate points per set.
    pub c: usize,
    /// Risk-aversion coefficient for incumbent selection.
    pub nu: f64,
    /// Truly active indices; required exactly when mode is Oracle.
    pub oracle_active: Option<Vec<usize>>,
    pub seed: u64,
    pub priors: Priors,
}

impl RunConfig {
    /// Full-scale defaults used by the simulation studies.
    pub fn standard(mode: Mode, n0: usize, n_steps: usize, seed: u64) -> Self {
        Self {
            mode,
            n0,
            n_steps,
            g: 0.05,
            rho: 0.02,
            delta: 0.30,
            chain_m: 1000,
            subsample_m: 100,
            q: 100,
            c: 300,
            nu: 1.0,
            oracle_active: None,
            seed,
            priors: Priors::default(),
        }
    }

    /// Small illustrative preset for the three-dimensional toy problem.
    pub fn toy_preset(mode: Mode, n_steps: usize, seed: u64) -> Self {
        Self {
            mode,
            n0: 10,
            n_steps,
            g: 0.5,
            rho: 0.3,
            delta: 0.15,
            chain_m: 500,
            subsample_m: 25,
            q: 100,
            c: 300,
            nu: 1.0,
            oracle_active: None,
            seed,
            priors: Priors::default(),
        }
    }

    pub fn validate(&self, p0: usize) -> Result<()> {
        if self.n0 < 2 {
            return Err(Error::invalid("n0 must be at least 2"));
        }
        if self.subsample_m == 0 || self.subsample_m > self.chain_m {
            return Err(Error::invalid("need 1 <= subsample_m <= chain_m"));
        }
        if self.c == 0 {
            return Err(Error::invalid("need at least one candidate point"));
        }
        if !(self.g > 0.0 && self.g < 1.0) || !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::invalid("g and rho must lie in (0, 1)"));
        }
        if !(self.delta > 0.0) {
            return Err(Error::invalid("delta must be positive"));
        }
        if self.nu < 0.0 {
            return Err(Error::invalid("nu must be >= 0"));
        }
        match (&self.mode, &self.oracle_active) {
            (Mode::Oracle, None) => {
                return Err(Error::invalid("oracle mode requires oracle_active"))
            }
            (Mode::Oracle, Some(active)) => {
                if active.is_empty() || active.iter().any(|&k| k >= p0) {
                    return Err(Error::invalid("oracle_active indices out of range"));
                }
            }
            (_, Some(_)) => {
                return Err(Error::invalid("oracle_active only applies to oracle mode"))
            }
            _ => {}
        }
        self.priors.validate()
    }
}

#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: usize,
    /// Optimum estimate in the original coordinates.
    pub chi_hat: Vec<f64>,
    /// Noiseless objective value at `chi_hat`.
    pub f_at_chi: f64,
    /// Original indices of the columns still in the model.
    pub global_keep: Vec<usize>,
    /// Original indices of the locally active variables this step.
    pub local_active: Vec<usize>,
    /// Variables actually free during acquisition (post-fallback).
    pub n_used: usize,
    /// Acquired point in original coordinates; absent on the final step.
    pub next_point: Option<Vec<f64>>,
    pub observed_y: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub mode: Mode,
    pub seed: u64,
    pub p0: usize,
    /// Initial design and responses in original coordinates, shared by all
    /// modes given the same seed.
    pub init_x: DMatrix<f64>,
    pub init_y: DVector<f64>,
    pub steps: Vec<StepRecord>,
}

// RNG stream purposes; combined with the step so no two uses collide.
const PURPOSE_INIT: u64 = 0;
const PURPOSE_INIT_Y: u64 = 1;
const PURPOSE_CHAIN: u64 = 2;
const PURPOSE_CLOUDS: u64 = 3;
const PURPOSE_CANDIDATES: u64 = 4;
const PURPOSE_NOISE: u64 = 5;
// Chain refits after a removal get their own band.
const PURPOSE_REFIT: u64 = 16;

/// Deterministic per-(seed, step, purpose) stream seed, splitmix64-style, so
/// modes that skip a stage still draw identical values for shared stages.
pub fn derive_seed(base: u64, step: u64, purpose: u64) -> u64 {
    let mut z = base
        .wrapping_add(step.wrapping_mul(0x9E3779B97F4A7C15).rotate_left(17))
        .wrapping_add(purpose.wrapping_mul(0xBF58476D1CE4E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

const INIT_LHS_RESTARTS: usize = 100;

/// Sequential run with global and local variable selection.
pub fn run_solid(objective: &Objective, config: &RunConfig) -> Result<RunTrace> {
    if config.mode != Mode::Solid {
        return Err(Error::invalid("run_solid requires mode = Solid"));
    }
    run_impl(objective, config)
}

/// Sequential run in one of the comparison modes (GVS, Oracle, None).
pub fn run_baseline(objective: &Objective, config: &RunConfig) -> Result<RunTrace> {
    if config.mode == Mode::Solid {
        return Err(Error::invalid("use run_solid for mode = Solid"));
    }
    run_impl(objective, config)
}

fn run_impl(objective: &Objective, config: &RunConfig) -> Result<RunTrace> {
    let p0 = objective.p0;
    config.validate(p0)?;
    let use_global = matches!(config.mode, Mode::Solid | Mode::Gvs);
    let use_local = config.mode == Mode::Solid;

    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0, PURPOSE_INIT));
    let lhs = maximin_lhs(config.n0, p0, INIT_LHS_RESTARTS, &mut init_rng)?;
    let init_x = lhs.points().clone();
    let mut y_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0, PURPOSE_INIT_Y));
    let init_y = DVector::from_fn(config.n0, |i, _| {
        let row: Vec<f64> = (0..p0).map(|j| init_x[(i, j)]).collect();
        noisy_eval(objective, &row, &mut y_rng)
    });

    let mut design = Design::new(init_x.clone(), init_y.clone())?;
    // Values substituted for removed coordinates when calling the objective;
    // the box center until an optimum estimate exists.
    let mut fill_in = vec![0.5; p0];
    if let Some(active) = &config.oracle_active {
        let mut keep = active.clone();
        keep.sort_unstable();
        keep.dedup();
        design.retain_columns(&keep);
    }

    let mut prev_chi_full: Option<Vec<f64>> = None;
    let mut steps = Vec::with_capacity(config.n_steps + 1);

    for step in 0..=config.n_steps {
        let chain_cfg = ChainConfig::new(
            config.chain_m,
            config.chain_m,
            derive_seed(config.seed, step as u64, PURPOSE_CHAIN),
        );
        let mut draws = run_chain(&design.x, &design.y, &config.priors, &chain_cfg)?;

        if use_global {
            // Removals are permanent; refit until the keep set stabilizes.
            let mut round = 0u64;
            loop {
                let activity = global_activity(&draws, config.g);
                let (reduced, removed) = apply_global_selection(&design, &activity)?;
                if !removed {
                    break;
                }
                for &k in &design.col_map {
                    if !reduced.col_map.contains(&k) {
                        if let Some(prev) = &prev_chi_full {
                            fill_in[k] = prev[k];
                        }
                    }
                }
                design = reduced;
                let refit_cfg = ChainConfig::new(
                    config.chain_m,
                    config.chain_m,
                    derive_seed(config.seed, step as u64, PURPOSE_REFIT + round),
                );
                draws = run_chain(&design.x, &design.y, &config.priors, &refit_cfg)?;
                round += 1;
            }
        }
        let p_cur = design.p();
        let global_keep = design.col_map.clone();
        let prev_chi_cur: Option<Vec<f64>> = prev_chi_full
            .as_ref()
            .map(|full| global_keep.iter().map(|&k| full[k]).collect());

        let report = if use_local {
            let mut cloud_rng =
                ChaCha8Rng::seed_from_u64(derive_seed(config.seed, step as u64, PURPOSE_CLOUDS));
            Some(local_importance(
                &draws,
                config.subsample_m,
                config.delta,
                config.q,
                config.rho,
                &design,
                |surface| estimate_chi_t(surface, prev_chi_cur.as_deref(), &design),
                &mut cloud_rng,
            )?)
        } else {
            None
        };
        let local_active: Vec<usize> = report
            .as_ref()
            .map(|r| r.active.iter().map(|&k| global_keep[k]).collect())
            .unwrap_or_else(|| global_keep.clone());
        // No branch exists for an empty active set; fall back to a
        // full-space step rather than stall.
        let mask: Vec<bool> = match report.as_ref() {
            Some(r) if !r.active.is_empty() => r.active_mask(p_cur),
            _ => vec![true; p_cur],
        };
        let n_used = mask.iter().filter(|&&a| a).count();

        let thin = draws.thin(config.subsample_m);
        let chi_full_box = estimate_chi_marginal(
            &thin,
            &design,
            &SearchRegion::full_box(p_cur),
            prev_chi_cur.as_deref(),
        );
        let (chi_cur, region_a) = if use_local {
            let region_a = build_active_region(&chi_full_box, &mask);
            // With every variable active the restricted search is the
            // full-box search already performed.
            let chi = if region_a.free_dims().len() == p_cur {
                chi_full_box.clone()
            } else {
                estimate_chi_marginal(&thin, &design, &region_a, Some(&chi_full_box))
            };
            (chi, region_a)
        } else {
            (chi_full_box, SearchRegion::full_box(p_cur))
        };
        let chi_hat = design.embed(&chi_cur, &fill_in);
        let f_at_chi = objective.eval(&chi_hat);
        prev_chi_full = Some(chi_hat.clone());

        let mut record = StepRecord {
            step,
            chi_hat,
            f_at_chi,
            global_keep: global_keep.clone(),
            local_active,
            n_used,
            next_point: None,
            observed_y: None,
        };

        if step < config.n_steps {
            let (_, incumbent_fhat) = select_incumbent(&thin, &design, config.nu);
            // Plug-in noise scale for the augmentation factor.
            let tau = (thin.iter().map(|s| s.params.tau2()).sum::<f64>() / thin.len() as f64)
                .sqrt();
            let mut cand_rng = ChaCha8Rng::seed_from_u64(derive_seed(
                config.seed,
                step as u64,
                PURPOSE_CANDIDATES,
            ));

            let chosen = if use_local {
                let r_delta = build_restricted_region(
                    &report.as_ref().unwrap().chi_draws,
                    config.delta,
                    &chi_cur,
                    &mask,
                );
                let mut c_delta =
                    build_candidates(&r_delta, config.c, CandidateOrigin::Restricted, &mut cand_rng)?;
                let mut c_a = build_candidates(
                    &region_a,
                    config.c,
                    CandidateOrigin::Unrestricted,
                    &mut cand_rng,
                )?;
                evaluate_aei(&mut c_delta, &thin, incumbent_fhat, tau);
                evaluate_aei(&mut c_a, &thin, incumbent_fhat, tau);
                choose_candidate_set(c_delta, c_a)
            } else {
                let mut set = build_candidates(
                    &SearchRegion::full_box(p_cur),
                    config.c,
                    CandidateOrigin::Unrestricted,
                    &mut cand_rng,
                )?;
                evaluate_aei(&mut set, &thin, incumbent_fhat, tau);
                set
            };

            let aei_fn = |x: &[f64]| aei(x, &thin, incumbent_fhat, tau);
            let grad_fn = |x: &[f64]| aei_gradient(x, &thin, incumbent_fhat, tau, &mask);
            let x_star = line_search_maximize(&chosen, config.delta, &mask, &aei_fn, &grad_fn);

            let x_star_full = design.embed(&x_star, &fill_in);
            let mut noise_rng =
                ChaCha8Rng::seed_from_u64(derive_seed(config.seed, step as u64, PURPOSE_NOISE));
            let y_obs = noisy_eval(objective, &x_star_full, &mut noise_rng);
            design.push(&x_star, y_obs);
            record.next_point = Some(x_star_full);
            record.observed_y = Some(y_obs);
        }
        steps.push(record);
    }

    Ok(RunTrace {
        mode: config.mode,
        seed: config.seed,
        p0,
        init_x,
        init_y,
        steps,
    })
}

/// Relative improvement per step: `f(chi_i) - f(chi_0)`; entry 0 is zero by
/// definition.
pub fn improvement(trace: &RunTrace) -> Vec<f64> {
    let base = trace.steps[0].f_at_chi;
    trace.steps.iter().map(|s| s.f_at_chi - base).collect()
}

/// Mean relative improvement over the sequential steps (excludes step 0).
pub fn overall_improvement(trace: &RunTrace) -> f64 {
    let imp = improvement(trace);
    if imp.len() <= 1 {
        return 0.0;
    }
    imp[1..].iter().sum::<f64>() / (imp.len() - 1) as f64
}
