//! Independent reference computations shared by the oracle tests and the
//! acceptance report. Each returns the measured discrepancy; callers decide
//! the tolerance.

use super::{mean_var, rng, synthetic};
use mrfcox::evaluation::{brier_score, integrated_brier_score, km_censoring, SurvivalPredictor};
use mrfcox::likelihood::{log_likelihood, log_likelihood_grad_hess_beta_j};
use mrfcox::priors::{gamma_conditional_include_prob, MrfSpec, SpikeSlabSpec};
use mrfcox::sampler::{init_chain, run_chain, HyperParameters, McmcConfig, PreparedModel};
use mrfcox::{build_partition, interval_sets, PriorGraph, SurvivalDataset};
use nalgebra::DMatrix;
use rand::Rng;

pub fn log_normal(x: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + x * x / var)
}

/// `a sum(gamma) + b gamma'G gamma + sum_j log N(beta_j; 0, sigma_j^2)` from
/// the dense matrix.
pub fn log_joint(gamma: &[bool], beta: &[f64], g: &[f64], mrf: &MrfSpec, ss: &SpikeSlabSpec) -> f64 {
    let p = gamma.len();
    let mut quad = 0.0;
    for i in 0..p {
        for j in 0..p {
            if gamma[i] && gamma[j] {
                quad += g[i * p + j];
            }
        }
    }
    let size = gamma.iter().filter(|&&x| x).count() as f64;
    let slab = ss.c * ss.c * ss.tau * ss.tau;
    let spike = ss.tau * ss.tau;
    let prior: f64 = beta
        .iter()
        .zip(gamma)
        .map(|(&b, &on)| log_normal(b, if on { slab } else { spike }))
        .sum();
    mrf.a * size + mrf.b * quad + prior
}

pub fn random_graph(p: usize, density: f64, r: &mut impl Rng) -> PriorGraph {
    let mut w = vec![0.0; p * p];
    for i in 0..p {
        for j in i + 1..p {
            if r.random::<f64>() < density {
                let v = r.random::<f64>();
                w[i * p + j] = v;
                w[j * p + i] = v;
            }
        }
    }
    PriorGraph::from_dense(p, w).unwrap()
}

pub fn config(a: f64, b: f64) -> McmcConfig {
    McmcConfig {
        priors: HyperParameters {
            a,
            b,
            ..HyperParameters::default()
        },
        ..McmcConfig::desk()
    }
}

/// Worst relative error of the Gibbs inclusion probability against
/// normalizing the two enumerated joint densities, over 200 instances with
/// p = 1..10.
pub fn gamma_conditional_worst() -> f64 {
    let mut r = rng(11);
    let mut worst = 0.0f64;
    for trial in 0..200 {
        let p = 1 + trial % 10;
        let g = random_graph(p, 0.5, &mut r);
        let mrf = MrfSpec {
            a: r.random_range(-3.0..1.0),
            b: r.random_range(0.0..1.0),
        };
        let ss = SpikeSlabSpec::new(r.random_range(0.02..0.2), r.random_range(2.0..25.0)).unwrap();
        let beta: Vec<f64> = (0..p).map(|_| r.random_range(-0.5..0.5)).collect();
        let gamma: Vec<bool> = (0..p).map(|_| r.random::<bool>()).collect();
        for j in 0..p {
            let mut on = gamma.clone();
            on[j] = true;
            let mut off = gamma.clone();
            off[j] = false;
            let l1 = log_joint(&on, &beta, g.as_dense(), &mrf, &ss);
            let l0 = log_joint(&off, &beta, g.as_dense(), &mrf, &ss);
            let m = l1.max(l0);
            let want = (l1 - m).exp() / ((l1 - m).exp() + (l0 - m).exp());
            let got = gamma_conditional_include_prob(j, &gamma, beta[j], &g, &mrf, &ss).unwrap();
            worst = worst.max((got - want).abs() / want);
        }
    }
    worst
}

/// Worst relative errors (gradient, curvature) of the coordinate derivatives
/// against central differences of the log-likelihood plus normal prior, over
/// 100 random small instances.
pub fn finite_difference_worst() -> (f64, f64) {
    let mut r = rng(2024);
    let mut worst = (0.0f64, 0.0f64);
    for trial in 0..100 {
        let p = 1 + trial % 5;
        let n = 8 + trial % 23;
        let beta_gen: Vec<f64> = (0..p).map(|_| r.random_range(-1.0..1.0)).collect();
        let data = synthetic(n, &beta_gen, 1000 + trial as u64);
        let part = build_partition(&data, 1 + trial % 6).unwrap();
        let sets = interval_sets(&data, &part).unwrap();
        let h: Vec<f64> = (0..part.intervals()).map(|_| r.random_range(0.05..1.5)).collect();
        let beta: Vec<f64> = (0..p).map(|_| r.random_range(-1.5..1.5)).collect();
        let var = r.random_range(0.01..2.0);
        let j = trial % p;

        let f = |b: f64| {
            let mut bb = beta.clone();
            bb[j] = b;
            log_likelihood(&bb, &h, &data, &sets).unwrap() + log_normal(b, var)
        };
        let b0 = beta[j];
        let e1 = 1e-5;
        let fd1 = (f(b0 + e1) - f(b0 - e1)) / (2.0 * e1);
        let e2 = 1e-3;
        let fd2 = (f(b0 + e2) - 2.0 * f(b0) + f(b0 - e2)) / (e2 * e2);
        let (g1, g2) = log_likelihood_grad_hess_beta_j(j, &beta, &h, &data, &sets, var).unwrap();
        worst.0 = worst.0.max((g1 - fd1).abs() / fd1.abs().max(1.0));
        worst.1 = worst.1.max((g2 - fd2).abs() / fd2.abs().max(1.0));
    }
    worst
}

/// (MCMC mean, quadrature mean) of a single included coefficient with the
/// baseline hazard held fixed.
pub fn posterior_mean_vs_quadrature() -> (f64, f64) {
    let data = synthetic(40, &[0.7], 31);
    let g = PriorGraph::empty(1).unwrap();
    let cfg = config(-3.0, 0.0);
    let model = PreparedModel::new(&data, &g, &cfg).unwrap();
    let mut chain = init_chain(&data, &model, 5, 0).unwrap();
    chain.set_gamma(vec![true]);
    let h = chain.state().h.clone();
    let var = model.priors.spike_slab.variance(true);

    let step = 1e-3;
    let grid: Vec<f64> = (0..=6000).map(|i| -3.0 + i as f64 * step).collect();
    let logs: Vec<f64> = grid
        .iter()
        .map(|&b| log_likelihood(&[b], &h, &data, &model.sets).unwrap() + log_normal(b, var))
        .collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let exact = grid.iter().zip(&w).map(|(b, w)| b * w).sum::<f64>() / w.iter().sum::<f64>();

    let draws: Vec<f64> = (0..30_000)
        .map(|_| {
            chain.update_beta();
            chain.state().beta[0]
        })
        .collect();
    let (mc, _) = mean_var(&draws[1000..]);
    (mc, exact)
}

/// Largest |z| of the empirical mean and variance of the hazard increments
/// against the gamma conditional derived from first principles.
pub fn hazard_moment_worst_z() -> f64 {
    let beta = [0.4, -0.6, 0.0];
    let data = synthetic(80, &beta, 13);
    let g = PriorGraph::empty(3).unwrap();
    let cfg = config(-3.0, 0.0);
    let model = PreparedModel::new(&data, &g, &cfg).unwrap();
    let mut chain = init_chain(&data, &model, 9, 0).unwrap();
    chain.set_beta(beta.to_vec());

    let gp = model.priors.gamma_process;
    let cuts = model.partition.cuts();
    let x = data.covariates();
    let risk = |i: usize| (0..3).map(|j| x[(i, j)] * beta[j]).sum::<f64>().exp();
    let params: Vec<(f64, f64)> = cuts
        .windows(2)
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            let fails_here = |i: usize| data.events()[i] && data.times()[i] >= lo && data.times()[i] < hi;
            let d = (0..data.n()).filter(|&i| fails_here(i)).count() as f64;
            let sum: f64 = (0..data.n())
                .filter(|&i| data.times()[i] >= lo && !fails_here(i))
                .map(risk)
                .sum();
            let shape = gp.a0 * gp.eta * (hi.powf(gp.kappa) - lo.powf(gp.kappa)) + d;
            (shape, gp.a0 + sum)
        })
        .collect();

    let n = 20_000;
    let mut draws = vec![Vec::with_capacity(n); params.len()];
    for _ in 0..n {
        chain.update_h();
        for (kk, v) in chain.state().h.iter().enumerate() {
            draws[kk].push(*v);
        }
    }
    let mut worst = 0.0f64;
    for (kk, &(shape, rate)) in params.iter().enumerate() {
        let (m, v) = mean_var(&draws[kk]);
        let mean = shape / rate;
        let var = shape / (rate * rate);
        let se_mean = (var / n as f64).sqrt();
        let se_var = var * ((2.0 + 6.0 / shape) / n as f64).sqrt();
        worst = worst.max((m - mean).abs() / se_mean).max((v - var).abs() / se_var);
    }
    worst
}

struct Fixed(Vec<f64>);

impl SurvivalPredictor for Fixed {
    fn subjects(&self) -> usize {
        self.0.len()
    }
    fn survival(&self, i: usize, _t: f64) -> f64 {
        self.0[i]
    }
}

/// Worst absolute error of Brier and integrated Brier scores on four-subject
/// toys against values computed by hand.
pub fn brier_toy_worst() -> f64 {
    let x = DMatrix::zeros(4, 1);
    let d = SurvivalDataset::new(
        vec![1.0, 2.0, 3.0, 4.0],
        vec![true, false, true, true],
        x.clone(),
        vec!["x".into()],
    )
    .unwrap();
    // censoring KM is 1 before t = 2 and 2/3 from then on
    let g = km_censoring(&d);
    let pred = Fixed(vec![0.2, 0.5, 0.7, 0.9]);
    let late = (0.04 + 1.5 * 0.09 + 1.5 * 0.01) / 4.0;
    let early = (0.04 + 0.25 + 0.09 + 0.01) / 4.0;
    // [0,1): 0.2475, [1,2): 0.0975, [2,2.5): late
    let ibs = (0.2475 + 0.0975 + 0.5 * late) / 2.5;

    let uncensored = SurvivalDataset::new(vec![1.0, 2.0, 3.0, 4.0], vec![true; 4], x, vec!["x".into()])
        .unwrap();
    let g1 = km_censoring(&uncensored);
    let half = Fixed(vec![0.5; 4]);

    [
        brier_score(2.5, &pred, &d, &g).unwrap().score - late,
        brier_score(1.5, &pred, &d, &g).unwrap().score - early,
        integrated_brier_score(2.5, &pred, &d, &g).unwrap() - ibs,
        brier_score(2.5, &half, &uncensored, &g1).unwrap().score - 0.25,
        integrated_brier_score(4.0, &half, &uncensored, &g1).unwrap() - 0.25,
    ]
    .iter()
    .fold(0.0f64, |w, e| w.max(e.abs()))
}

/// Whether chains with b = 0 give bit-identical draws on the empty graph and
/// on three random weighted graphs.
pub fn b_zero_traces_identical() -> bool {
    let beta_true: Vec<f64> = (0..12).map(|j| if j < 4 { 0.8 } else { 0.0 }).collect();
    let data = synthetic(60, &beta_true, 21);
    let cfg = McmcConfig {
        iterations: 300,
        warmup: 100,
        thin: 2,
        ..config(-2.0, 0.0)
    };
    let reference = run_chain(&data, &PriorGraph::empty(12).unwrap(), &cfg, 0).unwrap();
    let mut r = rng(99);
    (0..3).all(|_| {
        let g = random_graph(12, 0.6, &mut r);
        let other = run_chain(&data, &g, &cfg, 0).unwrap();
        other.gamma_draws == reference.gamma_draws
            && other.beta_draws == reference.beta_draws
            && other.h_draws == reference.h_draws
    })
}
