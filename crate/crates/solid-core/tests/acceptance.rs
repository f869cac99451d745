//! End-to-end acceptance suite. Each numbered criterion prints one PASS/FAIL
//! line (visible with `cargo test --test acceptance -- --nocapture`) and
//! fails its test on violation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

use solid_core::acquisition::{
    aei, aei_gradient, build_candidates, ei, CandidateOrigin,
};
use solid_core::design::{maximin_lhs, truncated_normal_cloud};
use solid_core::gp::{build_surface, kernel, marginal_mean_var, FittedSurface, GpParams};
use solid_core::mcmc::{
    eta_conditional, inclusion_probability, mh_update_r, mh_update_u, mu_conditional,
    theta_conditional, Priors,
};
use solid_core::region::{RegionDim, SearchRegion};
use solid_core::solid_loop::{
    overall_improvement, run_baseline, run_solid, Mode, RunConfig, RunTrace,
};
use solid_core::testbed::{
    beach_f, drum_f, simba_f, Objective, BEACH_MAX, DRUM_MAX, SIMBA_MAX, TOY_MAX,
};

fn report(n: usize, desc: &str, ok: bool) {
    println!(
        "criterion {n:02} [{}] {desc}",
        if ok { "PASS" } else { "FAIL" }
    );
}

fn random_surface(rng: &mut ChaCha8Rng, n: usize, p: usize) -> FittedSurface {
    let x = DMatrix::from_fn(n, p, |_, _| rng.gen::<f64>());
    let y = DVector::from_fn(n, |i, _| {
        (5.0 * x[(i, 0)]).sin() + 0.4 * x.row(i).iter().skip(1).sum::<f64>()
    });
    let params = GpParams {
        mu: -0.5 + rng.gen::<f64>(),
        eta: 1.0 + 3.0 * rng.gen::<f64>(),
        r: 0.6 + 0.35 * rng.gen::<f64>(),
        u: (0..p).map(|_| 1.0 + 8.0 * rng.gen::<f64>()).collect(),
        b: vec![true; p],
        theta: 0.5,
    };
    build_surface(params, &x, &y).unwrap()
}

// --- Criteria 1-3: toy walkthrough (shared runs) ------------------------

fn toy_runs() -> Vec<RunTrace> {
    let obj = Objective::toy(3, 0.08).unwrap();
    (1..=10u64)
        .into_par_iter()
        .map(|seed| run_solid(&obj, &RunConfig::toy_preset(Mode::Solid, 9, seed)).unwrap())
        .collect()
}

#[test]
fn criteria_01_02_03_toy_walkthrough() {
    let traces = toy_runs();

    // Criterion 1: final objective value at the optimum estimate.
    let mut finals: Vec<f64> = traces
        .iter()
        .map(|t| t.steps.last().unwrap().f_at_chi)
        .collect();
    finals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = 0.5 * (finals[4] + finals[5]);
    let count_9 = finals.iter().filter(|&&f| f >= 9.0).count();
    let c1 = median >= 9.5 && count_9 >= 7;
    report(
        1,
        &format!("toy: median final f = {median:.2}, {count_9}/10 seeds >= 9.0"),
        c1,
    );

    // Criterion 2: steps where exactly one of the two real variables is
    // kept globally but declared locally inactive.
    let per_seed: Vec<usize> = traces
        .iter()
        .map(|t| {
            t.steps
                .iter()
                .filter(|s| {
                    let inactive = [0usize, 1]
                        .iter()
                        .filter(|&&k| {
                            s.global_keep.contains(&k) && !s.local_active.contains(&k)
                        })
                        .count();
                    inactive == 1
                })
                .count()
        })
        .collect();
    let mean_steps = per_seed.iter().sum::<usize>() as f64 / per_seed.len() as f64;
    let c2 = mean_steps >= 2.0;
    report(
        2,
        &format!("toy: mean {mean_steps:.1} steps/seed with one real variable locally off"),
        c2,
    );

    // Criterion 3: the noise column is gone by the final step.
    let removed = traces
        .iter()
        .filter(|t| !t.steps.last().unwrap().global_keep.contains(&2))
        .count();
    let c3 = removed * 10 >= 6 * traces.len();
    report(
        3,
        &format!("toy: noise variable removed in {removed}/10 seeds"),
        c3,
    );

    assert!(c1, "criterion 1 failed: finals {finals:?}");
    assert!(c2, "criterion 2 failed: per-seed counts {per_seed:?}");
    assert!(c3, "criterion 3 failed: removed in {removed}/10 seeds");
}

// --- Criterion 4: downscaled method comparison --------------------------

#[test]
fn criterion_04_method_comparison() {
    let obj = Objective::beach(8, 0.08).unwrap();
    let cfg = |mode: Mode, seed: u64| {
        let mut c = RunConfig::standard(mode, 40, 10, seed);
        c.chain_m = 500;
        c.subsample_m = 50;
        c.c = 150;
        if mode == Mode::Oracle {
            c.oracle_active = Some((0..6).collect());
        }
        c
    };
    let seeds: Vec<u64> = (1..=20).collect();
    let mean_improvement = |mode: Mode| -> f64 {
        let total: f64 = seeds
            .par_iter()
            .map(|&s| {
                let c = cfg(mode, s);
                let trace = if mode == Mode::Solid {
                    run_solid(&obj, &c).unwrap()
                } else {
                    run_baseline(&obj, &c).unwrap()
                };
                overall_improvement(&trace)
            })
            .sum();
        total / seeds.len() as f64
    };
    let solid = mean_improvement(Mode::Solid);
    let none = mean_improvement(Mode::None);
    let oracle = mean_improvement(Mode::Oracle);
    let ok = solid >= none && oracle >= none;
    report(
        4,
        &format!(
            "beach p=8, 20 paired seeds: mean overall improvement solid={solid:.3} \
             oracle={oracle:.3} none={none:.3}"
        ),
        ok,
    );
    assert!(ok, "solid={solid} oracle={oracle} none={none}");
}

// --- Criterion 5: EI closed form vs Monte Carlo -------------------------

#[test]
fn criterion_05_ei_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let n = 1_000_000;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mean = -1.0 + 2.0 * rng.gen::<f64>();
        let sd = 0.1 + 1.9 * rng.gen::<f64>();
        let inc = -1.0 + 2.0 * rng.gen::<f64>();
        let normal = rand_distr::Normal::new(mean, sd).unwrap();
        let mc = (0..n)
            .map(|_| (normal.sample(&mut rng) - inc).max(0.0))
            .sum::<f64>()
            / n as f64;
        let rel = (ei(mean, sd, inc) - mc).abs() / mc.max(1e-6);
        worst = worst.max(rel);
    }
    let ok = worst < 0.01;
    report(
        5,
        &format!("EI vs 1e6-draw Monte Carlo: worst relative error {worst:.2e}"),
        ok,
    );
    assert!(ok);
}

// --- Criterion 6: gradient suites ---------------------------------------

#[test]
fn criterion_06_gradient_suites() {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for case in 0..5 {
        let p = 2 + case % 3;
        let surface = random_surface(&mut rng, 8 + 2 * case, p);
        for _ in 0..20 {
            let x: Vec<f64> = (0..p).map(|_| 0.05 + 0.9 * rng.gen::<f64>()).collect();
            let (dmean, dvar) = surface.predict_gradients(&x);
            for k in 0..p {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let (mp, vp) = surface.predict(&xp);
                let (mm, vm) = surface.predict(&xm);
                let fd_m = (mp - mm) / (2.0 * h);
                let fd_v = (vp - vm) / (2.0 * h);
                worst = worst.max((dmean[k] - fd_m).abs() / fd_m.abs().max(1e-3));
                worst = worst.max((dvar[k] - fd_v).abs() / fd_v.abs().max(1e-3));
            }
        }
    }
    // AEI gradient against the same scheme, on marginals over three draws.
    let p = 3;
    let surfaces: Vec<FittedSurface> = (0..3).map(|_| random_surface(&mut rng, 10, p)).collect();
    let refs: Vec<&FittedSurface> = surfaces.iter().collect();
    let active = vec![true; p];
    for _ in 0..20 {
        let x: Vec<f64> = (0..p).map(|_| 0.05 + 0.9 * rng.gen::<f64>()).collect();
        let (inc, tau) = (0.2, 0.3);
        let g = aei_gradient(&x, &refs, inc, tau, &active);
        for k in 0..p {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let fd = (aei(&xp, &refs, inc, tau) - aei(&xm, &refs, inc, tau)) / (2.0 * h);
            worst = worst.max((g[k] - fd).abs() / fd.abs().max(1e-3));
        }
    }
    let ok = worst < 1e-4;
    report(
        6,
        &format!("prediction and AEI gradients vs finite differences: worst {worst:.2e}"),
        ok,
    );
    assert!(ok);
}

// --- Criterion 7: MCMC conjugacy and calibration ------------------------

fn dense_w(params: &GpParams, x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let gamma = params.gamma();
    DMatrix::from_fn(n, n, |i, j| {
        let xi: Vec<f64> = x.row(i).iter().copied().collect();
        let xj: Vec<f64> = x.row(j).iter().copied().collect();
        let k = kernel(&xi, &xj, &gamma).unwrap();
        params.r * k + if i == j { 1.0 - params.r } else { 0.0 }
    })
}

fn three_point_surface() -> FittedSurface {
    let x = DMatrix::from_row_slice(3, 1, &[0.1, 0.5, 0.9]);
    let y = DVector::from_row_slice(&[0.3, 1.1, -0.4]);
    let params = GpParams {
        mu: 0.2,
        eta: 2.0,
        r: 0.8,
        u: vec![4.0],
        b: vec![true],
        theta: 0.5,
    };
    build_surface(params, &x, &y).unwrap()
}

fn tv_distance(chain: &[f64], lo: f64, hi: f64, bins: usize, log_post: impl Fn(f64) -> f64) -> f64 {
    // Grid-quadrature bin masses of the un-normalized posterior.
    let grid_per_bin = 200;
    let width = (hi - lo) / bins as f64;
    let mut masses = vec![0.0; bins];
    let shift = log_post(0.5 * (lo + hi));
    for b in 0..bins {
        for g in 0..grid_per_bin {
            let v = lo + width * (b as f64 + (g as f64 + 0.5) / grid_per_bin as f64);
            masses[b] += (log_post(v) - shift).exp();
        }
    }
    let total: f64 = masses.iter().sum();
    for m in &mut masses {
        *m /= total;
    }
    let mut empirical = vec![0.0; bins];
    let inside = chain.iter().filter(|&&v| v >= lo && v < hi).count();
    for &v in chain {
        if v >= lo && v < hi {
            empirical[((v - lo) / width) as usize] += 1.0 / inside as f64;
        }
    }
    // Mass outside the window counts fully against the distance.
    let outside = 1.0 - inside as f64 / chain.len() as f64;
    0.5 * masses
        .iter()
        .zip(&empirical)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        + 0.5 * outside
}

#[test]
fn criterion_07_mcmc_conjugacy_calibration() {
    let priors = Priors::default();
    let surface = three_point_surface();
    let params = &surface.params;
    let x = surface.design().clone();
    let y = surface.responses().clone();

    // (a) conditionals against an independent dense-algebra computation.
    let w = dense_w(params, &x);
    let w_inv = w.clone().try_inverse().unwrap();
    let ones = DVector::from_element(3, 1.0);
    let resid = &y - &ones * params.mu;
    let quad = (resid.transpose() * &w_inv * &resid)[(0, 0)];
    // The fitted factorization carries a 1e-10 diagonal jitter the plain
    // dense inverse does not, hence the 1e-8 comparison window.
    let (shape, rate) = eta_conditional(&surface, &priors);
    let exact_a = (shape - (1.5 + priors.a_eta)).abs() < 1e-12
        && (rate - (priors.b_eta + 0.5 * quad)).abs() < 1e-8;

    let one_w_one = (ones.transpose() * &w_inv * &ones)[(0, 0)];
    let one_w_y = (ones.transpose() * &w_inv * &y)[(0, 0)];
    let prec = priors.sigma_mu.powi(-2) + params.eta * one_w_one;
    let (mu_mean, mu_var) = mu_conditional(&surface, &priors);
    let exact_mu = (mu_mean - params.eta * one_w_y / prec).abs() < 1e-8
        && (mu_var - 1.0 / prec).abs() < 1e-8;

    let (ta, tb) = theta_conditional(params, &priors);
    let exact_theta = ta == priors.a_theta + 1.0 && tb == priors.b_theta;

    let (ll_on, ll_off) = (-1.3, -2.1);
    let theta = 0.4;
    let direct = {
        let p1 = (ll_on as f64).exp() * theta;
        let p0 = (ll_off as f64).exp() * (1.0 - theta);
        p1 / (p1 + p0)
    };
    let exact_b = (inclusion_probability(ll_on, ll_off, theta) - direct).abs() < 1e-12;
    let part_a = exact_a && exact_mu && exact_theta && exact_b;

    // (b) single-parameter chains vs grid quadrature. The r chain uses data
    // whose posterior concentrates at high r; the Beta(10,1) independence
    // proposal has vanishing density near zero, so a diffuse target would
    // need far more than 1e5 draws to populate its left tail.
    let iters = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (xr, yr) = (
        DMatrix::from_row_slice(3, 1, &[0.1, 0.5, 0.9]),
        DVector::from_row_slice(&[0.53, 1.0, 0.53]),
    );
    let r_params = GpParams {
        mu: 0.0,
        eta: 100.0,
        r: 0.8,
        u: vec![4.0],
        b: vec![true],
        theta: 0.5,
    };
    let mut cur = build_surface(r_params.clone(), &xr, &yr).unwrap();
    let mut r_chain = Vec::with_capacity(iters);
    for _ in 0..iters {
        cur = mh_update_r(cur, &mut rng).unwrap();
        r_chain.push(cur.params.r);
    }
    let log_post_r = |r: f64| {
        let mut p = r_params.clone();
        p.r = r;
        build_surface(p, &xr, &yr).unwrap().log_likelihood()
    };
    let tv_r = tv_distance(&r_chain, 1e-6, 1.0 - 1e-6, 20, log_post_r);

    let mut cur = surface.clone();
    let mut u_chain = Vec::with_capacity(iters);
    for _ in 0..iters {
        cur = mh_update_u(cur, 0, &priors, &mut rng).unwrap();
        u_chain.push(cur.params.u[0]);
    }
    let log_post_u = |u: f64| {
        let mut p = params.clone();
        p.u[0] = u;
        build_surface(p, &x, &y).unwrap().log_likelihood() - u / priors.b_u
    };
    let tv_u = tv_distance(&u_chain, 0.0, 120.0, 24, log_post_u);
    let part_b = tv_r <= 0.05 && tv_u <= 0.05;

    // (c) prior-refresh moments when the indicator is off.
    let mut off = surface.clone();
    off.params.b[0] = false;
    let off = build_surface(off.params.clone(), &x, &y).unwrap();
    let mut cur = off;
    let mut draws = Vec::with_capacity(iters);
    for _ in 0..iters {
        cur = mh_update_u(cur, 0, &priors, &mut rng).unwrap();
        draws.push(cur.params.u[0]);
    }
    let mean = draws.iter().sum::<f64>() / iters as f64;
    let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (iters - 1) as f64;
    let part_c = (mean - 10.0).abs() <= 0.1 && (var - 100.0).abs() <= 3.0;

    let ok = part_a && part_b && part_c;
    report(
        7,
        &format!(
            "MCMC: conditionals exact = {part_a}, chain TV r/u = {tv_r:.3}/{tv_u:.3}, \
             prior refresh mean/var = {mean:.2}/{var:.1}"
        ),
        ok,
    );
    assert!(ok);
}

// --- Criterion 8: GP exactness ------------------------------------------

#[test]
fn criterion_08_gp_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = 5 + (rng.gen::<u32>() % 10) as usize;
        let p = 1 + (rng.gen::<u32>() % 3) as usize;
        let surface = random_surface(&mut rng, n, p);
        let params = &surface.params;
        let x = surface.design();
        let y = surface.responses();
        let w = dense_w(params, x);
        let w_inv = w.clone().try_inverse().unwrap();
        let ones = DVector::from_element(n, 1.0);
        let resid = y - &ones * params.mu;

        let q: Vec<f64> = (0..p).map(|_| rng.gen::<f64>()).collect();
        let gamma = params.gamma();
        let kvec = DVector::from_fn(n, |i, _| {
            let xi: Vec<f64> = x.row(i).iter().copied().collect();
            kernel(&q, &xi, &gamma).unwrap()
        });
        let mean = params.mu + params.r * (kvec.transpose() * &w_inv * &resid)[(0, 0)];
        let var = params.r / params.eta
            - params.r * params.r / params.eta * (kvec.transpose() * &w_inv * &kvec)[(0, 0)];
        let (pm, pv) = surface.predict(&q);
        worst = worst.max((pm - mean).abs()).max((pv - var).abs());

        let n_f = n as f64;
        let ln_det = w.lu().determinant().ln();
        let ll = -0.5 * n_f * (2.0 * std::f64::consts::PI).ln()
            - 0.5 * (ln_det - n_f * params.eta.ln())
            - 0.5 * params.eta * (resid.transpose() * &w_inv * &resid)[(0, 0)];
        worst = worst.max((surface.log_likelihood() - ll).abs());
    }
    let exactness_ok = worst < 1e-8;

    // Interpolation as the nugget vanishes.
    let mut interp_worst = 0.0f64;
    let base = random_surface(&mut rng, 8, 2);
    let mut params = base.params.clone();
    params.r = 1.0 - 1e-9;
    let interp = build_surface(params, base.design(), base.responses()).unwrap();
    for i in 0..8 {
        let row: Vec<f64> = base.design().row(i).iter().copied().collect();
        interp_worst = interp_worst.max((interp.predict(&row).0 - base.responses()[i]).abs());
    }
    let interp_ok = interp_worst < 1e-6;

    let ok = exactness_ok && interp_ok;
    report(
        8,
        &format!(
            "GP dense-oracle worst error {worst:.2e}; interpolation worst {interp_worst:.2e}"
        ),
        ok,
    );
    assert!(ok);
}

// --- Criterion 9: structural invariants ---------------------------------

#[test]
fn criterion_09_structural_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);

    let mut lhs_ok = true;
    for _ in 0..50 {
        let n = 2 + (rng.gen::<u32>() % 29) as usize;
        let p = 1 + (rng.gen::<u32>() % 6) as usize;
        let d = maximin_lhs(n, p, 3, &mut rng).unwrap();
        for j in 0..p {
            let mut strata: Vec<usize> = (0..n)
                .map(|i| ((d.points()[(i, j)] * n as f64) as usize).min(n - 1))
                .collect();
            strata.sort_unstable();
            lhs_ok &= strata == (0..n).collect::<Vec<_>>();
        }
    }

    let mut cloud_ok = true;
    for _ in 0..50 {
        let p = 1 + (rng.gen::<u32>() % 5) as usize;
        let center: Vec<f64> = (0..p).map(|_| rng.gen::<f64>()).collect();
        let delta = 0.01 + 0.5 * rng.gen::<f64>();
        let cloud = truncated_normal_cloud(&center, delta, 50, &mut rng).unwrap();
        cloud_ok &= cloud.iter().all(|&v| (0.0..=1.0).contains(&v));
    }

    let mut pin_ok = true;
    for _ in 0..20 {
        let p = 2 + (rng.gen::<u32>() % 4) as usize;
        let dims: Vec<RegionDim> = (0..p)
            .map(|_| {
                if rng.gen::<bool>() {
                    RegionDim::Fixed(rng.gen::<f64>())
                } else {
                    RegionDim::Interval { lo: 0.1, hi: 0.9 }
                }
            })
            .collect();
        let region = SearchRegion::new(dims.clone());
        let set = build_candidates(&region, 20, CandidateOrigin::Restricted, &mut rng).unwrap();
        for pt in &set.points {
            for (k, dim) in dims.iter().enumerate() {
                if let RegionDim::Fixed(v) = dim {
                    pin_ok &= pt[k] == *v;
                }
            }
        }
    }

    let surfaces: Vec<FittedSurface> = (0..3).map(|_| random_surface(&mut rng, 10, 2)).collect();
    let refs: Vec<&FittedSurface> = surfaces.iter().collect();
    let mut aei_ok = true;
    for _ in 0..10_000 {
        let x = [rng.gen::<f64>(), rng.gen::<f64>()];
        let inc = -1.0 + 3.0 * rng.gen::<f64>();
        let tau = rng.gen::<f64>();
        let a = aei(&x, &refs, inc, tau);
        let (mean, var) = marginal_mean_var(&refs, &x);
        let e = ei(mean, var.sqrt(), inc);
        aei_ok &= a >= 0.0 && a <= e + 1e-12;
    }

    let ok = lhs_ok && cloud_ok && pin_ok && aei_ok;
    report(
        9,
        &format!(
            "invariants: LHS strata {lhs_ok}, clouds in cube {cloud_ok}, \
             pins exact {pin_ok}, 0 <= AEI <= EI {aei_ok}"
        ),
        ok,
    );
    assert!(ok);
}

// --- Criterion 10: test-function embedding ------------------------------

#[test]
fn criterion_10_test_function_embedding() {
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let objs = [
        Objective::beach(15, 0.0).unwrap(),
        Objective::drum(15, 0.0).unwrap(),
        Objective::simba(15, 0.0).unwrap(),
    ];
    let mut constant_ok = true;
    for _ in 0..1_000 {
        let mut x: Vec<f64> = (0..15).map(|_| rng.gen::<f64>()).collect();
        for obj in &objs {
            let base = obj.eval(&x);
            let saved = x.clone();
            for k in 6..15 {
                x[k] = rng.gen::<f64>();
            }
            constant_ok &= obj.eval(&x) == base;
            x = saved;
        }
    }

    // Published argmaxes are rounded to 3-4 digits, hence the small slack.
    let slack = 1e-5;
    let mut probe_ok = true;
    let cases: [(&[f64], fn(&[f64]) -> f64); 4] = [
        (TOY_MAX.0, solid_core::testbed::toy_f),
        (BEACH_MAX.0, beach_f),
        (DRUM_MAX.0, drum_f),
        (SIMBA_MAX.0, simba_f),
    ];
    for (chi, f) in cases {
        let base = f(chi);
        for k in 0..chi.len() {
            for step in [-0.02, 0.02] {
                let mut x = chi.to_vec();
                x[k] = (x[k] + step).clamp(0.0, 1.0);
                probe_ok &= f(&x) <= base + slack;
            }
        }
    }

    let ok = constant_ok && probe_ok;
    report(
        10,
        &format!("embedding constant in spare dims {constant_ok}, argmax probes {probe_ok}"),
        ok,
    );
    assert!(ok);
}
