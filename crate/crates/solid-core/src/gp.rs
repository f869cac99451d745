//! Gaussian-process surrogate in the total-precision parameterization:
//! covariance `V(x, x') = (1/eta) [ r K(x, x') + (1-r) 1{x = x'} ]`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::{Error, Result};

/// One posterior state of the surrogate parameters.
///
/// The kernel range of variable `k` is `gamma_k = u_k * b_k`; the surface
/// variance is `sigma^2 = r/eta` and the nugget is `tau^2 = (1-r)/eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct GpParams {
    pub mu: f64,
    pub eta: f64,
    pub r: f64,
    pub u: Vec<f64>,
    pub b: Vec<bool>,
    pub theta: f64,
}

impl GpParams {
    pub fn p(&self) -> usize {
        self.u.len()
    }

    pub fn gamma(&self) -> Vec<f64> {
        self.u
            .iter()
            .zip(&self.b)
            .map(|(&u, &b)| if b { u } else { 0.0 })
            .collect()
    }

    pub fn sigma2(&self) -> f64 {
        self.r / self.eta
    }

    pub fn tau2(&self) -> f64 {
        (1.0 - self.r) / self.eta
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::invalid("eta must be positive"));
        }
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(Error::invalid("r must lie in (0, 1)"));
        }
        if self.u.len() != self.b.len() {
            return Err(Error::invalid("u and b must have equal length"));
        }
        if self.u.iter().any(|&u| !(u >= 0.0)) {
            return Err(Error::invalid("range magnitudes u_k must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::invalid("theta must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Squared-exponential correlation `exp{-sum_k gamma_k (x_k - x'_k)^2}`.
pub fn kernel(x: &[f64], x2: &[f64], gamma: &[f64]) -> Result<f64> {
    if gamma.iter().any(|&g| g < 0.0) {
        return Err(Error::invalid("kernel ranges gamma_k must be non-negative"));
    }
    Ok(kernel_unchecked(x, x2, gamma))
}

#[inline]
fn kernel_unchecked(x: &[f64], x2: &[f64], gamma: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..gamma.len() {
        let d = x[k] - x2[k];
        s += gamma[k] * d * d;
    }
    (-s).exp()
}

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

/// A GP surface with its factorization of `W_X = r K_X + (1-r) I` cached.
///
/// The cached solves make mean-level changes cheap: everything that depends
/// on `mu` is reassembled from `W^-1 y` and `W^-1 1`.
#[derive(Debug, Clone)]
pub struct FittedSurface {
    pub params: GpParams,
    x: DMatrix<f64>,
    y: DVector<f64>,
    gamma: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    log_det_w: f64,
    w_inv_y: DVector<f64>,
    w_inv_one: DVector<f64>,
    /// `W^-1 (y - mu 1)`.
    alpha: DVector<f64>,
    y_w_y: f64,
    one_w_y: f64,
    one_w_one: f64,
}

/// Assembles and factorizes the surface covariance for one parameter state.
pub fn build_surface(params: GpParams, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FittedSurface> {
    params.validate()?;
    let n = x.nrows();
    if n == 0 || n != y.len() {
        return Err(Error::invalid("build_surface requires rows(X) = len(y) >= 1"));
    }
    if x.ncols() != params.p() {
        return Err(Error::invalid("parameter dimension must match design columns"));
    }
    let gamma = params.gamma();
    let r = params.r;
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        w[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let kij = kernel_unchecked(
                x.row(i).transpose().as_slice(),
                x.row(j).transpose().as_slice(),
                &gamma,
            );
            w[(i, j)] = r * kij;
            w[(j, i)] = r * kij;
        }
    }

    let mut jitter = JITTER_START;
    let chol = loop {
        let mut wj = w.clone();
        for i in 0..n {
            wj[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(wj) {
            break c;
        }
        jitter *= 10.0;
        if jitter > JITTER_MAX {
            return Err(Error::NotPositiveDefinite {
                max_jitter: JITTER_MAX,
            });
        }
    };

    let log_det_w = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let ones = DVector::from_element(n, 1.0);
    let w_inv_y = chol.solve(y);
    let w_inv_one = chol.solve(&ones);
    let y_w_y = y.dot(&w_inv_y);
    let one_w_y = ones.dot(&w_inv_y);
    let one_w_one = ones.dot(&w_inv_one);
    let alpha = &w_inv_y - &w_inv_one * params.mu;

    Ok(FittedSurface {
        params,
        x: x.clone(),
        y: y.clone(),
        gamma,
        chol,
        log_det_w,
        w_inv_y,
        w_inv_one,
        alpha,
        y_w_y,
        one_w_y,
        one_w_one,
    })
}

/// Full prediction output at one point.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub mean: f64,
    pub var: f64,
    pub dmean: Vec<f64>,
    pub dvar: Vec<f64>,
}

impl FittedSurface {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn responses(&self) -> &DVector<f64> {
        &self.y
    }

    /// Same factorization, new mean level. Only `mu`-dependent caches move.
    pub fn with_mu(&self, mu: f64) -> FittedSurface {
        let mut s = self.clone();
        s.params.mu = mu;
        s.alpha = &s.w_inv_y - &s.w_inv_one * mu;
        s
    }

    /// Same factorization, new precision. `W_X` does not depend on `eta`.
    pub fn with_eta(&self, eta: f64) -> FittedSurface {
        let mut s = self.clone();
        s.params.eta = eta;
        s
    }

    pub fn with_theta(&self, theta: f64) -> FittedSurface {
        let mut s = self.clone();
        s.params.theta = theta;
        s
    }

    /// `(y - mu 1)^T W^-1 (y - mu 1)` at the given mean level.
    pub fn quad_form(&self, mu: f64) -> f64 {
        self.y_w_y - 2.0 * mu * self.one_w_y + mu * mu * self.one_w_one
    }

    /// `1^T W^-1 1`.
    pub fn one_w_one(&self) -> f64 {
        self.one_w_one
    }

    /// `1^T W^-1 y`.
    pub fn one_w_y(&self) -> f64 {
        self.one_w_y
    }

    /// Gaussian log likelihood of the observed responses under this state.
    pub fn log_likelihood(&self) -> f64 {
        let n = self.n() as f64;
        let eta = self.params.eta;
        -0.5 * n * (2.0 * std::f64::consts::PI).ln()
            - 0.5 * (self.log_det_w - n * eta.ln())
            - 0.5 * eta * self.quad_form(self.params.mu)
    }

    fn kernel_vec(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_fn(self.n(), |i, _| {
            kernel_unchecked(x, self.x.row(i).transpose().as_slice(), &self.gamma)
        })
    }

    /// Predictive mean and variance of the latent surface at `x`.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let k = self.kernel_vec(x);
        let r = self.params.r;
        let mean = self.params.mu + r * k.dot(&self.alpha);
        let w_inv_k = self.chol.solve(&k);
        let var = self.params.sigma2() - (r * r / self.params.eta) * k.dot(&w_inv_k);
        (mean, var.max(0.0))
    }

    /// Gradients of the predictive mean and variance with respect to `x`.
    pub fn predict_gradients(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let out = self.predict_full(x);
        (out.dmean, out.dvar)
    }

    /// Mean, variance, and their spatial gradients in one pass.
    pub fn predict_full(&self, x: &[f64]) -> Prediction {
        let n = self.n();
        let p = self.p();
        let r = self.params.r;
        let k = self.kernel_vec(x);
        let w_inv_k = self.chol.solve(&k);
        let mean = self.params.mu + r * k.dot(&self.alpha);
        let var_raw = self.params.sigma2() - (r * r / self.params.eta) * k.dot(&w_inv_k);

        let mut dmean = vec![0.0; p];
        let mut dvar = vec![0.0; p];
        for dim in 0..p {
            let g = self.gamma[dim];
            if g == 0.0 {
                continue;
            }
            let mut dm = 0.0;
            let mut dv = 0.0;
            for i in 0..n {
                // dK(x, x_i)/dx_dim = -2 gamma (x_dim - X_i,dim) K(x, x_i)
                let dk = -2.0 * g * (x[dim] - self.x[(i, dim)]) * k[i];
                dm += dk * self.alpha[i];
                dv += dk * w_inv_k[i];
            }
            dmean[dim] = r * dm;
            dvar[dim] = -2.0 * (r * r / self.params.eta) * dv;
        }
        Prediction {
            mean,
            var: var_raw.max(0.0),
            dmean,
            dvar,
        }
    }
}

/// Cheap standalone log likelihood (builds and discards the factorization).
pub fn log_likelihood(params: &GpParams, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    Ok(build_surface(params.clone(), x, y)?.log_likelihood())
}

/// Ordered collection of retained posterior states with cached factorizations.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    pub draws: Vec<FittedSurface>,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// `m` representative draws by even thinning over the retained chain.
    pub fn thin(&self, m: usize) -> Vec<&FittedSurface> {
        let total = self.len();
        let m = m.clamp(1, total);
        if m == total {
            return self.draws.iter().collect();
        }
        if m == 1 {
            return vec![self.draws.last().unwrap()];
        }
        (0..m)
            .map(|i| &self.draws[i * (total - 1) / (m - 1)])
            .collect()
    }
}

/// Draw-averaged predictive mean and its gradient at `x`.
pub fn marginal_surface(draws: &[&FittedSurface], x: &[f64]) -> (f64, Vec<f64>) {
    assert!(!draws.is_empty());
    let p = draws[0].p();
    let mut mean = 0.0;
    let mut grad = vec![0.0; p];
    for d in draws {
        let out = d.predict_full(x);
        mean += out.mean;
        for k in 0..p {
            grad[k] += out.dmean[k];
        }
    }
    let m = draws.len() as f64;
    mean /= m;
    for g in &mut grad {
        *g /= m;
    }
    (mean, grad)
}

/// Draw-averaged predictive mean only.
pub fn marginal_mean(draws: &[&FittedSurface], x: &[f64]) -> f64 {
    let mut mean = 0.0;
    for d in draws {
        mean += d.predict(x).0;
    }
    mean / draws.len() as f64
}

/// Marginal predictive mean and variance by the law of total variance over
/// the draw mixture.
pub fn marginal_mean_var(draws: &[&FittedSurface], x: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut second = 0.0;
    for d in draws {
        let (m, v) = d.predict(x);
        mean += m;
        second += v + m * m;
    }
    let n = draws.len() as f64;
    mean /= n;
    let var = (second / n - mean * mean).max(0.0);
    (mean, var)
}

/// Marginal mean/variance plus their spatial gradients.
pub fn marginal_mean_var_grads(
    draws: &[&FittedSurface],
    x: &[f64],
) -> (f64, f64, Vec<f64>, Vec<f64>) {
    assert!(!draws.is_empty());
    let p = draws[0].p();
    let n = draws.len() as f64;
    let mut mean = 0.0;
    let mut second = 0.0;
    let mut dmean = vec![0.0; p];
    let mut dsecond = vec![0.0; p];
    for d in draws {
        let out = d.predict_full(x);
        mean += out.mean;
        second += out.var + out.mean * out.mean;
        for k in 0..p {
            dmean[k] += out.dmean[k];
            dsecond[k] += out.dvar[k] + 2.0 * out.mean * out.dmean[k];
        }
    }
    mean /= n;
    second /= n;
    for k in 0..p {
        dmean[k] /= n;
        dsecond[k] /= n;
    }
    let var = (second - mean * mean).max(0.0);
    let dvar: Vec<f64> = (0..p).map(|k| dsecond[k] - 2.0 * mean * dmean[k]).collect();
    (mean, var, dmean, dvar)
}
