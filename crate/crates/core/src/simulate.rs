//! Synthetic data for the simulation studies: block-correlated covariates,
//! sparse true coefficients, Weibull proportional-hazards event times with
//! independent exponential censoring, and the perturbed prior graphs.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::graph::PriorGraph;

/// Replicate id reserved for the shared test set.
pub const TEST_REPLICATE: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub n: usize,
    pub p: usize,
    pub n_relevant: usize,
    pub block_size: usize,
    pub block_rho: f64,
    pub beta_range: (f64, f64),
    /// Weibull scale of the true cumulative baseline hazard `eta t^kappa`.
    pub eta: f64,
    /// Weibull shape.
    pub kappa: f64,
    pub censor_rate_target: f64,
    pub n_datasets: usize,
    pub seed: u64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            n: 100,
            p: 200,
            n_relevant: 20,
            block_size: 15,
            block_rho: 0.5,
            beta_range: (-1.0, 1.0),
            eta: 1.0,
            kappa: 1.5,
            censor_rate_target: 0.2,
            n_datasets: 20,
            seed: 2024,
        }
    }
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n < 2 || self.p < 1 {
            return fail(format!("need n >= 2 and p >= 1, got n={} p={}", self.n, self.p));
        }
        if self.n_relevant > self.p || self.block_size > self.n_relevant {
            return fail(format!(
                "need block_size ({}) <= n_relevant ({}) <= p ({})",
                self.block_size, self.n_relevant, self.p
            ));
        }
        if !(self.block_rho.abs() < 1.0)
            || (self.block_size > 1 && self.block_rho <= -1.0 / (self.block_size as f64 - 1.0))
        {
            return fail(format!("block_rho {} gives a singular covariance", self.block_rho));
        }
        if !(self.beta_range.0 < self.beta_range.1) {
            return fail(format!("empty beta_range {:?}", self.beta_range));
        }
        if !(self.eta > 0.0 && self.kappa > 0.0) {
            return fail("eta and kappa must be positive".into());
        }
        if !(0.0..1.0).contains(&self.censor_rate_target) {
            return fail(format!(
                "censor_rate_target {} must lie in [0, 1)",
                self.censor_rate_target
            ));
        }
        if self.n_datasets == 0 {
            return fail("n_datasets must be >= 1".into());
        }
        Ok(())
    }

    pub fn truth(&self) -> Vec<bool> {
        (0..self.p).map(|j| j < self.n_relevant).collect()
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Identity with `block_rho` between the first `block_size` covariates.
pub fn make_covariance(spec: &SimulationSpec) -> DMatrix<f64> {
    let mut sigma = DMatrix::identity(spec.p, spec.p);
    for i in 0..spec.block_size {
        for j in 0..spec.block_size {
            if i != j {
                sigma[(i, j)] = spec.block_rho;
            }
        }
    }
    sigma
}

pub fn make_precision(spec: &SimulationSpec) -> Result<DMatrix<f64>> {
    make_covariance(spec)
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Config("covariance is not positive definite".into()))
}

/// True coefficients: the first `n_relevant` uniform on `beta_range`, the rest 0.
/// Shared by every replicate.
pub fn true_coefficients(spec: &SimulationSpec) -> Vec<f64> {
    let mut rng = stream_rng(spec.seed, 0);
    let (lo, hi) = spec.beta_range;
    (0..spec.p)
        .map(|j| {
            if j < spec.n_relevant {
                rng.random_range(lo..hi)
            } else {
                0.0
            }
        })
        .collect()
}

/// Exponential censoring rate whose expected censoring fraction given the
/// event times, `mean_i (1 - exp(-rate T_i))`, equals `target`.
pub fn calibrate_censoring_rate(event_times: &[f64], target: f64) -> f64 {
    if target <= 0.0 {
        return 0.0;
    }
    let frac = |rate: f64| {
        event_times.iter().map(|&t| -(-rate * t).exp_m1()).sum::<f64>() / event_times.len() as f64
    };
    let mut hi = 1.0;
    while frac(hi) < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if frac(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// A simulated replicate with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub dataset: SurvivalDataset,
    pub truth: Vec<bool>,
    pub beta_true: Vec<f64>,
    pub censoring_rate: f64,
}

/// Draws replicate `replicate_id`: fresh covariates and outcomes, shared coefficients.
pub fn draw_dataset(spec: &SimulationSpec, replicate_id: u64) -> Result<SimulatedData> {
    spec.validate()?;
    let beta_true = true_coefficients(spec);
    let chol = make_covariance(spec)
        .cholesky()
        .ok_or_else(|| Error::Config("covariance is not positive definite".into()))?;
    let lower = chol.l();
    let mut rng = stream_rng(spec.seed, replicate_id.wrapping_add(1));

    let (n, p) = (spec.n, spec.p);
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let z = DVector::from_iterator(p, (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let row = &lower * z;
        for j in 0..p {
            x[(i, j)] = row[j];
        }
    }
    let beta = DVector::from_column_slice(&beta_true);
    let lp = &x * &beta;
    let event_times: Vec<f64> = lp
        .iter()
        .map(|&eta_i| {
            let u: f64 = 1.0 - rng.random::<f64>();
            (-u.ln() / (spec.eta * eta_i.exp())).powf(1.0 / spec.kappa)
        })
        .collect();
    let rate = calibrate_censoring_rate(&event_times, spec.censor_rate_target);
    let mut times = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for &t in &event_times {
        let c = if rate > 0.0 {
            rng.sample(Exp::new(rate).expect("positive rate"))
        } else {
            f64::INFINITY
        };
        if t <= c {
            times.push(t);
            events.push(true);
        } else {
            times.push(c);
            events.push(false);
        }
    }
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    let dataset = SurvivalDataset::new(times, events, x, names)?;
    Ok(SimulatedData {
        dataset,
        truth: spec.truth(),
        beta_true,
        censoring_rate: rate,
    })
}

/// Named prior-graph scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub graph: PriorGraph,
}

/// Scenario names in emission order.
pub const SCENARIO_NAMES: [&str; 13] = [
    "empty",
    "true",
    "uniform_50",
    "uniform_75",
    "uniform_86",
    "uniform_94",
    "block_5x5",
    "block_10x10",
    "block_5x5_plus",
    "block_10x10_plus",
    "noise_50",
    "noise_100",
    "noise_200",
];

/// The prior graphs of both simulation studies, derived from the true graph.
pub fn scenario_graphs(spec: &SimulationSpec) -> Result<Vec<Scenario>> {
    spec.validate()?;
    let truth = PriorGraph::from_precision_pattern(&make_precision(spec)?, 1e-8)?;
    let block5: Vec<usize> = (0..5.min(spec.p)).collect();
    let block10: Vec<usize> = (0..10.min(spec.p)).collect();
    let noise = |fraction: f64, tag: u64| -> Result<PriorGraph> {
        truth.add_false_edges(fraction, spec.seed ^ (0x6e6f_6973_6500_0000 | tag))
    };
    let graphs = vec![
        PriorGraph::empty(spec.p)?,
        truth.clone(),
        truth.remove_edges_uniform(2)?,
        truth.remove_edges_uniform(4)?,
        truth.remove_edges_uniform(6)?,
        truth.remove_edges_uniform(9)?,
        truth.remove_block_edges(&block5, false)?,
        truth.remove_block_edges(&block10, false)?,
        truth.remove_block_edges(&block5, true)?,
        truth.remove_block_edges(&block10, true)?,
        noise(0.5, 50)?,
        noise(1.0, 100)?,
        noise(2.0, 200)?,
    ];
    Ok(SCENARIO_NAMES
        .iter()
        .zip(graphs)
        .map(|(name, graph)| Scenario {
            name: (*name).to_owned(),
            graph,
        })
        .collect())
}
