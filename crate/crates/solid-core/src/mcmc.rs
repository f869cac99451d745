//! Metropolis-Hastings-within-Gibbs posterior sampling of the surrogate
//! parameters. `mu`, `eta`, `theta`, and the inclusion indicators `b_k` have
//! conjugate full conditionals; `r` uses independence MH with a Beta(10,1)
//! proposal; each `u_k` uses a sliding-uniform proposal when its variable is
//! included and is refreshed from its prior otherwise.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};

use crate::gp::{build_surface, FittedSurface, GpParams, PosteriorDraws};
use crate::{Error, Result};

/// Prior hyperparameters.
///
/// `u_k ~ Gamma(a_u, scale b_u)`, so the defaults give `E(u_k) = 10` and
/// `Var(u_k) = 100`. `eta ~ Gamma(a_eta, rate b_eta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Priors {
    pub sigma_mu: f64,
    pub a_eta: f64,
    pub b_eta: f64,
    pub a_theta: f64,
    pub b_theta: f64,
    pub a_u: f64,
    pub b_u: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Priors {
            sigma_mu: 100.0,
            a_eta: 0.1,
            b_eta: 0.1,
            a_theta: 1.0,
            b_theta: 1.0,
            a_u: 1.0,
            b_u: 10.0,
        }
    }
}

impl Priors {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.sigma_mu,
            self.a_eta,
            self.b_eta,
            self.a_theta,
            self.b_theta,
            self.a_u,
            self.b_u,
        ];
        if all.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::invalid("all prior hyperparameters must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    /// Retained draws.
    pub m: usize,
    /// Discarded initial sweeps.
    pub burn_in: usize,
    pub seed: u64,
}

impl ChainConfig {
    pub fn new(m: usize, burn_in: usize, seed: u64) -> Self {
        ChainConfig { m, burn_in, seed }
    }
}

/// Shape and rate of the Gamma full conditional of `eta`.
pub fn eta_conditional(surface: &FittedSurface, priors: &Priors) -> (f64, f64) {
    let n = surface.n() as f64;
    let quad = surface.quad_form(surface.params.mu);
    (0.5 * n + priors.a_eta, priors.b_eta + 0.5 * quad)
}

/// Mean and variance of the Normal full conditional of `mu`.
pub fn mu_conditional(surface: &FittedSurface, priors: &Priors) -> (f64, f64) {
    let eta = surface.params.eta;
    let prec = priors.sigma_mu.powi(-2) + eta * surface.one_w_one();
    (eta * surface.one_w_y() / prec, 1.0 / prec)
}

/// Alpha and beta of the Beta full conditional of `theta`.
pub fn theta_conditional(params: &GpParams, priors: &Priors) -> (f64, f64) {
    let s = params.b.iter().filter(|&&b| b).count() as f64;
    let p = params.p() as f64;
    (priors.a_theta + s, priors.b_theta + p - s)
}

/// Inclusion probability for `b_k = 1` given log likelihoods under both
/// indicator values.
pub fn inclusion_probability(ll_on: f64, ll_off: f64, theta: f64) -> f64 {
    if theta >= 1.0 {
        return 1.0;
    }
    if theta <= 0.0 {
        return 0.0;
    }
    // p_k1 / (p_k1 + p_k0) rearranged through logs for stability.
    let logit = ll_on + theta.ln() - ll_off - (1.0 - theta).ln();
    1.0 / (1.0 + (-logit).exp())
}

/// One pass over the conjugate parameters: `eta`, `mu`, `theta`, then every
/// `b_k`. Toggling an indicator refactorizes the covariance.
pub fn gibbs_conjugate_sweep<R: Rng + ?Sized>(
    surface: FittedSurface,
    priors: &Priors,
    rng: &mut R,
) -> Result<FittedSurface> {
    let mut cur = surface;

    let (shape, rate) = eta_conditional(&cur, priors);
    let eta = Gamma::new(shape, 1.0 / rate).unwrap().sample(rng);
    cur = cur.with_eta(eta);

    let (m, v) = mu_conditional(&cur, priors);
    let mu = Normal::new(m, v.sqrt()).unwrap().sample(rng);
    cur = cur.with_mu(mu);

    let (a, b) = theta_conditional(&cur.params, priors);
    let theta = Beta::new(a, b).unwrap().sample(rng);
    cur = cur.with_theta(theta);

    let p = cur.params.p();
    for k in 0..p {
        let mut cand_params = cur.params.clone();
        cand_params.b[k] = !cand_params.b[k];
        let cand = build_surface(cand_params, cur.design(), cur.responses())?;
        let (on, off) = if cur.params.b[k] {
            (cur.log_likelihood(), cand.log_likelihood())
        } else {
            (cand.log_likelihood(), cur.log_likelihood())
        };
        let want_on = rng.gen::<f64>() < inclusion_probability(on, off, cur.params.theta);
        if want_on != cur.params.b[k] {
            cur = cand;
        }
    }
    Ok(cur)
}

fn log_beta_10_1_pdf(r: f64) -> f64 {
    10.0f64.ln() + 9.0 * r.ln()
}

/// Independence MH update of the variance proportion `r` with a Beta(10,1)
/// proposal and an implicit uniform prior.
pub fn mh_update_r<R: Rng + ?Sized>(
    surface: FittedSurface,
    rng: &mut R,
) -> Result<FittedSurface> {
    let proposal = Beta::new(10.0, 1.0).unwrap();
    let r_new: f64 = proposal.sample(rng);
    if !(r_new > 0.0 && r_new < 1.0) {
        return Ok(surface);
    }
    let mut cand_params = surface.params.clone();
    cand_params.r = r_new;
    let cand = build_surface(cand_params, surface.design(), surface.responses())?;
    let log_accept = cand.log_likelihood() - surface.log_likelihood()
        + log_beta_10_1_pdf(surface.params.r)
        - log_beta_10_1_pdf(r_new);
    if log_accept >= 0.0 || rng.gen::<f64>().ln() < log_accept {
        Ok(cand)
    } else {
        Ok(surface)
    }
}

/// Sliding-uniform proposal half-width for the current `u`.
pub fn sliding_epsilon(u: f64, h: f64) -> f64 {
    if u >= 30.0 {
        (u * h).min(50.0)
    } else {
        (u * h).max(1.0)
    }
}

fn proposal_interval(u: f64, h: f64) -> (f64, f64) {
    let eps = sliding_epsilon(u, h);
    ((u - 50.0 * eps).max(0.0), u + eps)
}

fn log_gamma_prior_unnorm(u: f64, a: f64, scale: f64) -> f64 {
    if u < 0.0 {
        return f64::NEG_INFINITY;
    }
    if a == 1.0 {
        -u / scale
    } else if u == 0.0 {
        if a > 1.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    } else {
        (a - 1.0) * u.ln() - u / scale
    }
}

/// MH (or prior-refresh) update of one range magnitude `u_k`.
///
/// When `b_k = 0` the likelihood does not involve `u_k`, so it is resampled
/// from its Gamma prior. Otherwise a sliding-uniform candidate is drawn with
/// a fresh `h ~ Uniform(1/2, 2)`; the proposal-density correction conditions
/// on that `h`.
pub fn mh_update_u<R: Rng + ?Sized>(
    surface: FittedSurface,
    k: usize,
    priors: &Priors,
    rng: &mut R,
) -> Result<FittedSurface> {
    if !surface.params.b[k] {
        let prior = Gamma::new(priors.a_u, priors.b_u).unwrap();
        let mut params = surface.params.clone();
        params.u[k] = prior.sample(rng);
        // gamma_k = u_k * 0 is unchanged; no refactorization needed.
        let mut s = surface;
        s.params = params;
        return Ok(s);
    }

    let u = surface.params.u[k];
    let h = rng.gen_range(0.5..2.0);
    let (lo, hi) = proposal_interval(u, h);
    let u_new = rng.gen_range(lo..hi);
    let (rlo, rhi) = proposal_interval(u_new, h);
    if !(rlo..=rhi).contains(&u) {
        return Ok(surface);
    }

    let mut cand_params = surface.params.clone();
    cand_params.u[k] = u_new;
    let cand = build_surface(cand_params, surface.design(), surface.responses())?;
    let log_accept = cand.log_likelihood() - surface.log_likelihood()
        + log_gamma_prior_unnorm(u_new, priors.a_u, priors.b_u)
        - log_gamma_prior_unnorm(u, priors.a_u, priors.b_u)
        // forward density 1/(hi-lo); reverse density 1/(rhi-rlo)
        + (hi - lo).ln()
        - (rhi - rlo).ln();
    if log_accept >= 0.0 || rng.gen::<f64>().ln() < log_accept {
        Ok(cand)
    } else {
        Ok(surface)
    }
}

/// Runs `burn_in + m` full sweeps and retains the last `m` states with their
/// factorizations.
pub fn run_chain(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    priors: &Priors,
    config: &ChainConfig,
) -> Result<PosteriorDraws> {
    priors.validate()?;
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid("run_chain requires n >= 2 observations"));
    }
    if config.m == 0 {
        return Err(Error::invalid("run_chain requires at least one retained draw"));
    }
    let p = x.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mean = y.iter().sum::<f64>() / n as f64;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let var = var.max(1e-12);
    let u_prior = Gamma::new(priors.a_u, priors.b_u).unwrap();
    let init = GpParams {
        mu: mean,
        eta: 1.0 / var,
        r: 0.9,
        u: (0..p).map(|_| u_prior.sample(&mut rng)).collect(),
        b: vec![true; p],
        theta: 0.5,
    };
    let mut cur = build_surface(init, x, y)?;

    let total = config.burn_in + config.m;
    let mut draws = Vec::with_capacity(config.m);
    for sweep in 0..total {
        cur = gibbs_conjugate_sweep(cur, priors, &mut rng)?;
        cur = mh_update_r(cur, &mut rng)?;
        for k in 0..p {
            cur = mh_update_u(cur, k, priors, &mut rng)?;
        }
        if sweep >= config.burn_in {
            draws.push(cur.clone());
        }
    }
    Ok(PosteriorDraws { draws })
}
