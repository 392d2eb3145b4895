//! Three-block MCMC for the graph-structured Bayesian Cox model.
//!
//! Each iteration runs a systematic-scan Gibbs sweep over the inclusion
//! indicators, a Metropolis-Hastings sweep over the coefficients with a
//! Newton-step Gaussian proposal, and a gamma draw for every baseline-hazard
//! increment, in that order.
//!
//! Randomness: chain `c` of a run with seed `s` draws from ChaCha8 seeded with
//! `s` on stream `c`, so every chain is a pure function of `(s, c)` on every
//! platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{build_partition, interval_sets, IntervalSets, SurvivalDataset, TimePartition};
use crate::error::{Error, Result};
use crate::graph::PriorGraph;
use crate::likelihood::{CoordinateTerms, LikelihoodWorkspace};
use crate::priors::{
    hazard_increment_prior_params, inclusion_log_odds, normal_log_density, sigmoid,
    GammaProcessSpec, MrfSpec, SpikeSlabSpec,
};

/// Lower bound on the negative curvature used for the proposal variance.
pub const CURVATURE_FLOOR: f64 = 1e-6;
/// Standard deviation of the random-walk fallback proposal.
pub const FALLBACK_STEP: f64 = 0.1;

/// Hyperparameters as configured. `eta`/`kappa` default to a constant hazard
/// matched to the observed event rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParameters {
    pub a0: f64,
    pub eta: Option<f64>,
    pub kappa: Option<f64>,
    pub tau: f64,
    pub c: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for HyperParameters {
    fn default() -> Self {
        Self {
            a0: 2.0,
            eta: None,
            kappa: None,
            tau: 0.0375,
            c: 20.0,
            a: -3.0,
            b: 0.5,
        }
    }
}

/// Fully resolved prior specification of one fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelPriors {
    pub gamma_process: GammaProcessSpec,
    pub spike_slab: SpikeSlabSpec,
    pub mrf: MrfSpec,
}

impl HyperParameters {
    pub fn resolve(&self, data: &SurvivalDataset) -> Result<ModelPriors> {
        let total_time: f64 = data.times().iter().sum();
        // at least half an event so the default stays positive on all-censored data
        let rate = (data.event_count() as f64).max(0.5) / total_time;
        let gamma_process =
            GammaProcessSpec::new(self.a0, self.eta.unwrap_or(rate), self.kappa.unwrap_or(1.0))?;
        let spike_slab = SpikeSlabSpec::new(self.tau, self.c)?;
        let mrf = MrfSpec { a: self.a, b: self.b };
        mrf.validate()?;
        Ok(ModelPriors {
            gamma_process,
            spike_slab,
            mrf,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub iterations: usize,
    pub warmup: usize,
    pub thin: usize,
    pub chains: usize,
    pub seed: u64,
    pub partition_k: usize,
    pub priors: HyperParameters,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl McmcConfig {
    /// Desk-scale budget.
    pub fn desk() -> Self {
        Self {
            iterations: 6000,
            warmup: 3000,
            thin: 3,
            chains: 1,
            seed: 1,
            partition_k: crate::data::DEFAULT_INTERVALS,
            priors: HyperParameters::default(),
        }
    }

    /// Full replication budget: 30000 iterations, half warmup, thinning 6.
    pub fn paper() -> Self {
        Self {
            iterations: 30_000,
            warmup: 15_000,
            thin: 6,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.warmup >= self.iterations {
            return Err(Error::Config(format!(
                "warmup ({}) must be smaller than iterations ({})",
                self.warmup, self.iterations
            )));
        }
        if self.thin == 0 || self.chains == 0 || self.partition_k == 0 {
            return Err(Error::Config("thin, chains and partition_k must be >= 1".into()));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        (self.iterations - self.warmup) / self.thin
    }
}

/// Mutable state of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub beta: Vec<f64>,
    pub gamma: Vec<bool>,
    pub h: Vec<f64>,
    pub log_lik: f64,
    pub rng_seed: u64,
    pub chain_id: u64,
    pub iteration: usize,
    pub proposals: Vec<u64>,
    pub accepts: Vec<u64>,
    pub fallback_proposals: u64,
}

impl ChainState {
    pub fn model_size(&self) -> usize {
        self.gamma.iter().filter(|&&g| g).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub chain_id: u64,
    pub seed: u64,
    /// Accepted over proposed coefficient moves, pooled over coordinates.
    pub acceptance_rate: f64,
    pub coordinate_acceptance: Vec<f64>,
    pub fallback_proposals: u64,
}

/// Retained post-warmup, thinned draws of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub beta_draws: Vec<Vec<f64>>,
    pub gamma_draws: Vec<Vec<bool>>,
    pub h_draws: Vec<Vec<f64>>,
    pub loglik_trace: Vec<f64>,
    pub model_size_trace: Vec<usize>,
    pub diagnostics: ChainDiagnostics,
}

impl PosteriorSamples {
    pub fn retained(&self) -> usize {
        self.beta_draws.len()
    }

    pub fn p(&self) -> usize {
        self.beta_draws.first().map_or(0, Vec::len)
    }
}

/// Everything about a fit that does not change across iterations.
#[derive(Debug, Clone)]
pub struct PreparedModel {
    pub partition: TimePartition,
    pub sets: IntervalSets,
    pub priors: ModelPriors,
    pub hazard_prior: Vec<(f64, f64)>,
    pub neighbors: Vec<Vec<(usize, f64)>>,
}

impl PreparedModel {
    pub fn new(data: &SurvivalDataset, graph: &PriorGraph, config: &McmcConfig) -> Result<Self> {
        config.validate()?;
        if graph.p() != data.p() {
            return Err(Error::Dimension(format!(
                "graph has dimension {} but the dataset has {} covariates",
                graph.p(),
                data.p()
            )));
        }
        let partition = build_partition(data, config.partition_k)?;
        let sets = interval_sets(data, &partition)?;
        let priors = config.priors.resolve(data)?;
        let hazard_prior = hazard_increment_prior_params(&priors.gamma_process, &partition);
        Ok(Self {
            partition,
            sets,
            priors,
            hazard_prior,
            neighbors: graph.neighbors(),
        })
    }
}

/// Newton-step Gaussian proposal `(mean, variance)` at `beta` given the first
/// and second derivative of the conditional log posterior.
fn newton_proposal(beta: f64, first: f64, second: f64) -> Option<(f64, f64)> {
    let variance = 1.0 / (-second).max(CURVATURE_FLOOR);
    let mean = beta + variance * first;
    (mean.is_finite() && variance.is_finite()).then_some((mean, variance))
}

fn gaussian_log_density(x: f64, mean: f64, variance: f64) -> f64 {
    normal_log_density(x - mean, variance)
}

fn positive_gamma<R: Rng>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    let draw = Gamma::new(shape, 1.0 / rate)
        .expect("gamma parameters are positive")
        .sample(rng);
    draw.max(f64::MIN_POSITIVE)
}

/// `log r` of the coefficient move `current -> proposal` for coordinate `j`.
/// Returns `(log r, proposal log-likelihood)`.
fn log_acceptance_ratio(
    ws: &mut LikelihoodWorkspace<'_>,
    j: usize,
    current: f64,
    proposal: f64,
    prior_variance: f64,
    here: CoordinateTerms,
) -> (f64, f64) {
    let there = ws.propose(j, proposal - current);
    let post_here = here.value + normal_log_density(current, prior_variance);
    let post_there = there.value + normal_log_density(proposal, prior_variance);
    let forward = newton_proposal(
        current,
        here.first - current / prior_variance,
        here.second - 1.0 / prior_variance,
    );
    let reverse = newton_proposal(
        proposal,
        there.first - proposal / prior_variance,
        there.second - 1.0 / prior_variance,
    );
    let correction = match (forward, reverse) {
        (Some((u, v)), Some((ur, vr))) => {
            gaussian_log_density(current, ur, vr) - gaussian_log_density(proposal, u, v)
        }
        _ => 0.0,
    };
    (post_there - post_here + correction, there.value)
}

/// One MCMC chain bound to its data.
pub struct Chain<'a> {
    data: &'a SurvivalDataset,
    model: &'a PreparedModel,
    state: ChainState,
    ws: LikelihoodWorkspace<'a>,
    rng: ChaCha8Rng,
}

/// `gamma = 0`, `beta_j ~ N(0, tau^2)`, `h_k` from its prior.
pub fn init_chain<'a>(
    data: &'a SurvivalDataset,
    model: &'a PreparedModel,
    seed: u64,
    chain_id: u64,
) -> Result<Chain<'a>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain_id);
    let p = data.p();
    let tau = model.priors.spike_slab.tau;
    let beta: Vec<f64> = (0..p)
        .map(|_| tau * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let h: Vec<f64> = model
        .hazard_prior
        .iter()
        .map(|&(shape, rate)| positive_gamma(&mut rng, shape, rate))
        .collect();
    let mut ws = LikelihoodWorkspace::new(data, &model.sets, &h)?;
    ws.set_beta(&beta);
    let log_lik = ws.log_likelihood();
    let state = ChainState {
        beta,
        gamma: vec![false; p],
        h,
        log_lik,
        rng_seed: seed,
        chain_id,
        iteration: 0,
        proposals: vec![0; p],
        accepts: vec![0; p],
        fallback_proposals: 0,
    };
    Ok(Chain {
        data,
        model,
        state,
        ws,
        rng,
    })
}

impl<'a> Chain<'a> {
    pub fn state(&self) -> &ChainState {
        &self.state
    }

    /// Overrides the coefficients, e.g. to hold them fixed in tests.
    pub fn set_beta(&mut self, beta: Vec<f64>) {
        assert_eq!(beta.len(), self.data.p());
        self.ws.set_beta(&beta);
        self.state.beta = beta;
        self.state.log_lik = self.ws.log_likelihood();
    }

    pub fn set_gamma(&mut self, gamma: Vec<bool>) {
        assert_eq!(gamma.len(), self.data.p());
        self.state.gamma = gamma;
    }

    /// Systematic-scan Gibbs sweep over the inclusion indicators.
    pub fn update_gamma(&mut self) {
        let priors = &self.model.priors;
        for j in 0..self.state.gamma.len() {
            let neighbor_weight: f64 = self.model.neighbors[j]
                .iter()
                .filter(|(i, _)| self.state.gamma[*i])
                .map(|(_, w)| w)
                .sum();
            let prob = sigmoid(inclusion_log_odds(
                neighbor_weight,
                self.state.beta[j],
                &priors.mrf,
                &priors.spike_slab,
            ));
            self.state.gamma[j] = self.rng.random::<f64>() < prob;
        }
    }

    /// Metropolis-Hastings sweep over the coefficients.
    pub fn update_beta(&mut self) {
        let ss = self.model.priors.spike_slab;
        for j in 0..self.state.beta.len() {
            let var = ss.variance(self.state.gamma[j]);
            let current = self.state.beta[j];
            let here = self.ws.coordinate_terms(j, 0.0);
            let forward = newton_proposal(
                current,
                here.first - current / var,
                here.second - 1.0 / var,
            );
            let z: f64 = self.rng.sample(StandardNormal);
            let (proposal, log_r, new_ll) = match forward {
                Some((mean, v)) => {
                    let proposal = mean + v.sqrt() * z;
                    let (log_r, ll) = log_acceptance_ratio(&mut self.ws, j, current, proposal, var, here);
                    (proposal, log_r, ll)
                }
                None => {
                    self.state.fallback_proposals += 1;
                    let proposal = current + FALLBACK_STEP * z;
                    let there = self.ws.propose(j, proposal - current);
                    let log_r = there.value + normal_log_density(proposal, var)
                        - here.value
                        - normal_log_density(current, var);
                    (proposal, log_r, there.value)
                }
            };
            self.state.proposals[j] += 1;
            let u: f64 = self.rng.random();
            if log_r.is_finite() && u.ln() < log_r.min(0.0) {
                self.ws.accept_proposal(j, proposal - current);
                self.state.beta[j] = proposal;
                self.state.log_lik = new_ll;
                self.state.accepts[j] += 1;
            }
        }
        // full refresh bounds drift from the incremental updates
        self.ws.set_beta(&self.state.beta);
        self.state.log_lik = self.ws.log_likelihood();
    }

    /// Gamma draw of every hazard increment from its approximate conditional.
    pub fn update_h(&mut self) {
        let risk = self.ws.interval_risk_sums();
        let d = self.model.sets.d_counts();
        for (k, &(shape, rate)) in self.model.hazard_prior.iter().enumerate() {
            self.state.h[k] = positive_gamma(&mut self.rng, shape + d[k] as f64, rate + risk[k]);
        }
        self.ws.set_hazard(&self.state.h);
        self.state.log_lik = self.ws.log_likelihood();
    }

    /// One full iteration: gamma, beta, h.
    pub fn step(&mut self) {
        self.update_gamma();
        self.update_beta();
        self.update_h();
        self.state.iteration += 1;
    }

    pub fn diagnostics(&self) -> ChainDiagnostics {
        let proposed: u64 = self.state.proposals.iter().sum();
        let accepted: u64 = self.state.accepts.iter().sum();
        ChainDiagnostics {
            chain_id: self.state.chain_id,
            seed: self.state.rng_seed,
            acceptance_rate: if proposed == 0 {
                0.0
            } else {
                accepted as f64 / proposed as f64
            },
            coordinate_acceptance: self
                .state
                .proposals
                .iter()
                .zip(&self.state.accepts)
                .map(|(&p, &a)| if p == 0 { 0.0 } else { a as f64 / p as f64 })
                .collect(),
            fallback_proposals: self.state.fallback_proposals,
        }
    }

    /// Runs the configured number of iterations and keeps the thinned
    /// post-warmup draws.
    pub fn run(mut self, config: &McmcConfig) -> PosteriorSamples {
        let retained = config.retained();
        let mut out = PosteriorSamples {
            beta_draws: Vec::with_capacity(retained),
            gamma_draws: Vec::with_capacity(retained),
            h_draws: Vec::with_capacity(retained),
            loglik_trace: Vec::with_capacity(retained),
            model_size_trace: Vec::with_capacity(retained),
            diagnostics: self.diagnostics(),
        };
        for l in 1..=config.iterations {
            self.step();
            if l > config.warmup && (l - config.warmup) % config.thin == 0 {
                out.beta_draws.push(self.state.beta.clone());
                out.gamma_draws.push(self.state.gamma.clone());
                out.h_draws.push(self.state.h.clone());
                out.loglik_trace.push(self.state.log_lik);
                out.model_size_trace.push(self.state.model_size());
            }
        }
        out.diagnostics = self.diagnostics();
        out
    }
}

/// Runs chain `chain_id` of the configured fit.
pub fn run_chain(
    data: &SurvivalDataset,
    graph: &PriorGraph,
    config: &McmcConfig,
    chain_id: u64,
) -> Result<PosteriorSamples> {
    let model = PreparedModel::new(data, graph, config)?;
    run_prepared_chain(data, &model, config, chain_id)
}

pub fn run_prepared_chain(
    data: &SurvivalDataset,
    model: &PreparedModel,
    config: &McmcConfig,
    chain_id: u64,
) -> Result<PosteriorSamples> {
    Ok(init_chain(data, model, config.seed, chain_id)?.run(config))
}

/// Runs `config.chains` independent chains concurrently, in chain order.
pub fn run_chains_parallel(
    data: &SurvivalDataset,
    graph: &PriorGraph,
    config: &McmcConfig,
) -> Result<Vec<PosteriorSamples>> {
    let model = PreparedModel::new(data, graph, config)?;
    (0..config.chains as u64)
        .into_par_iter()
        .map(|c| run_prepared_chain(data, &model, config, c))
        .collect()
}
