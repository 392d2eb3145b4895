//! Prior densities: gamma-process baseline hazard, spike-and-slab coefficients
//! and the MRF prior on inclusion indicators. Everything is evaluated in log
//! space; the MRF normalising constant is never needed.

use serde::{Deserialize, Serialize};

use crate::data::TimePartition;
use crate::error::{Error, Result};
use crate::graph::PriorGraph;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Gamma-process prior `H_0 ~ GP(a0 H*, a0)` with Weibull mean `H*(t) = eta t^kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaProcessSpec {
    pub a0: f64,
    pub eta: f64,
    pub kappa: f64,
}

impl GammaProcessSpec {
    pub fn new(a0: f64, eta: f64, kappa: f64) -> Result<Self> {
        let spec = Self { a0, eta, kappa };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.a0, self.eta, self.kappa].iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "gamma process needs a0, eta, kappa > 0, got {self:?}"
            )))
        }
    }

    /// Prior mean cumulative hazard `H*(t)`.
    pub fn mean_cumulative_hazard(&self, t: f64) -> f64 {
        self.eta * t.powf(self.kappa)
    }
}

/// Spike-and-slab prior `beta_j | gamma_j ~ (1-gamma_j) N(0, tau^2) + gamma_j N(0, c^2 tau^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeSlabSpec {
    pub tau: f64,
    pub c: f64,
}

impl SpikeSlabSpec {
    pub fn new(tau: f64, c: f64) -> Result<Self> {
        let spec = Self { tau, c };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau.is_finite() && self.tau > 0.0 && self.c.is_finite() && self.c > 1.0 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "spike-and-slab needs tau > 0 and c > 1, got {self:?}"
            )))
        }
    }

    /// `sigma^2_{beta_j}` for the given indicator.
    pub fn variance(&self, included: bool) -> f64 {
        let t2 = self.tau * self.tau;
        if included {
            self.c * self.c * t2
        } else {
            t2
        }
    }
}

/// MRF prior `f(gamma | G) ∝ exp(a 1'gamma + b gamma'G gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrfSpec {
    pub a: f64,
    pub b: f64,
}

impl MrfSpec {
    pub fn validate(&self) -> Result<()> {
        if self.a.is_finite() && self.b.is_finite() && self.b >= 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("MRF needs finite a and b >= 0, got {self:?}")))
        }
    }
}

pub fn normal_log_density(x: f64, variance: f64) -> f64 {
    -0.5 * (LN_2PI + variance.ln() + x * x / variance)
}

/// `(shape, rate)` of the gamma prior on each hazard increment `h_k`.
pub fn hazard_increment_prior_params(
    spec: &GammaProcessSpec,
    partition: &TimePartition,
) -> Vec<(f64, f64)> {
    partition
        .cuts()
        .windows(2)
        .map(|w| {
            let shape = spec.a0
                * (spec.mean_cumulative_hazard(w[1]) - spec.mean_cumulative_hazard(w[0]));
            (shape, spec.a0)
        })
        .collect()
}

fn check_len(gamma: &[bool], p: usize, what: &str) -> Result<()> {
    if gamma.len() == p {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "gamma has length {} but {what} has dimension {p}",
            gamma.len()
        )))
    }
}

/// `a * sum(gamma) + b * gamma' G gamma`, both triangles of `G` counted.
pub fn mrf_log_prior_unnormalized(gamma: &[bool], g: &PriorGraph, spec: &MrfSpec) -> Result<f64> {
    check_len(gamma, g.p(), "graph")?;
    let size = gamma.iter().filter(|&&x| x).count() as f64;
    let mut quad = 0.0;
    for (i, j, w) in g.upper_edges() {
        if gamma[i] && gamma[j] {
            quad += 2.0 * w;
        }
    }
    Ok(spec.a * size + spec.b * quad)
}

/// Log odds of `gamma_j = 1` against `gamma_j = 0` given the other indicators
/// and `beta_j`. `neighbor_weight` is `sum_{i != j} G_ji gamma_i`.
pub fn inclusion_log_odds(
    neighbor_weight: f64,
    beta_j: f64,
    mrf: &MrfSpec,
    ss: &SpikeSlabSpec,
) -> f64 {
    // gamma'G gamma grows by 2 * neighbor_weight when gamma_j flips on.
    mrf.a + 2.0 * mrf.b * neighbor_weight + normal_log_density(beta_j, ss.variance(true))
        - normal_log_density(beta_j, ss.variance(false))
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Full conditional `P(gamma_j = 1 | gamma_{-j}, beta_j, G) = w_a / (w_a + w_b)`.
pub fn gamma_conditional_include_prob(
    j: usize,
    gamma: &[bool],
    beta_j: f64,
    g: &PriorGraph,
    mrf: &MrfSpec,
    ss: &SpikeSlabSpec,
) -> Result<f64> {
    check_len(gamma, g.p(), "graph")?;
    if j >= gamma.len() {
        return Err(Error::Dimension(format!("index {j} out of range")));
    }
    let neighbor_weight: f64 = (0..g.p())
        .filter(|&i| i != j && gamma[i])
        .map(|i| g.weight(j, i))
        .sum();
    Ok(sigmoid(inclusion_log_odds(neighbor_weight, beta_j, mrf, ss)))
}

/// `sum_j log N(beta_j; 0, sigma^2_{beta_j})`.
pub fn beta_log_prior(beta: &[f64], gamma: &[bool], ss: &SpikeSlabSpec) -> Result<f64> {
    if beta.len() != gamma.len() {
        return Err(Error::Dimension(format!(
            "beta has length {} and gamma {}",
            beta.len(),
            gamma.len()
        )));
    }
    Ok(beta
        .iter()
        .zip(gamma)
        .map(|(&b, &g)| normal_log_density(b, ss.variance(g)))
        .sum())
}
