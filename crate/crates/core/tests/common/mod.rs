#![allow(dead_code)]

pub mod oracles;

use mrfcox::SurvivalDataset;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Exponential-baseline survival data with standard normal covariates and
/// roughly 25% uniform censoring.
pub fn synthetic(n: usize, beta: &[f64], seed: u64) -> SurvivalDataset {
    let mut r = rng(seed);
    let p = beta.len();
    let x = DMatrix::from_fn(n, p, |_, _| r.sample::<f64, _>(StandardNormal));
    let mut times = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for i in 0..n {
        let lp: f64 = (0..p).map(|j| x[(i, j)] * beta[j]).sum();
        let t = r.sample::<f64, _>(Exp1) / lp.exp();
        let c = r.random::<f64>() * 4.0;
        times.push(t.min(c).max(1e-6));
        events.push(t <= c);
    }
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    SurvivalDataset::new(times, events, x, names).unwrap()
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}
