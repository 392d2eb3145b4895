//! Posterior summaries: median probability model, selection metrics, ESS and
//! selection stability across repeated fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::PosteriorSamples;

/// Frequency at or above which a feature counts as stably selected.
pub const DEFAULT_STABILITY_THRESHOLD: f64 = 0.20;

/// Median probability model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpmFit {
    pub inclusion_probs: Vec<f64>,
    pub selected: Vec<bool>,
    pub coefficients: Vec<f64>,
    pub model_size: usize,
}

/// MPM over the retained draws of one or more chains (draws are pooled).
///
/// The coefficient of a selected feature is `sum_l beta_j^(l) / sum_l gamma_j^(l)`
/// over all pooled draws.
pub fn mpm(chains: &[&PosteriorSamples]) -> Result<MpmFit> {
    let total: usize = chains.iter().map(|s| s.retained()).sum();
    if total == 0 {
        return Err(Error::InvalidArgument("MPM needs at least one retained draw".into()));
    }
    let p = chains.iter().find(|s| s.retained() > 0).map_or(0, |s| s.p());
    if chains
        .iter()
        .flat_map(|s| s.beta_draws.iter())
        .any(|b| b.len() != p)
    {
        return Err(Error::Dimension("chains disagree on the number of covariates".into()));
    }
    let mut beta_sum = vec![0.0; p];
    let mut gamma_sum = vec![0usize; p];
    for s in chains {
        for (beta, gamma) in s.beta_draws.iter().zip(&s.gamma_draws) {
            for j in 0..p {
                beta_sum[j] += beta[j];
                gamma_sum[j] += usize::from(gamma[j]);
            }
        }
    }
    let inclusion_probs: Vec<f64> = gamma_sum.iter().map(|&g| g as f64 / total as f64).collect();
    let selected: Vec<bool> = inclusion_probs.iter().map(|&q| q > 0.5).collect();
    let coefficients = (0..p)
        .map(|j| {
            if selected[j] {
                beta_sum[j] / gamma_sum[j] as f64
            } else {
                0.0
            }
        })
        .collect();
    let model_size = selected.iter().filter(|&&s| s).count();
    Ok(MpmFit {
        inclusion_probs,
        selected,
        coefficients,
        model_size,
    })
}

/// Posterior mean of each hazard increment over pooled draws.
pub fn posterior_mean_hazard(chains: &[&PosteriorSamples]) -> Result<Vec<f64>> {
    let draws: Vec<&Vec<f64>> = chains.iter().flat_map(|s| s.h_draws.iter()).collect();
    let k = draws
        .first()
        .map(|d| d.len())
        .ok_or_else(|| Error::InvalidArgument("no retained hazard draws".into()))?;
    let mut mean = vec![0.0; k];
    for d in &draws {
        for (m, v) in mean.iter_mut().zip(d.iter()) {
            *m += v;
        }
    }
    let n = draws.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

/// Sensitivity, specificity and accuracy; a ratio without a denominator is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionMetrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: f64,
}

pub fn selection_metrics(selected: &[bool], truth: &[bool]) -> Result<SelectionMetrics> {
    if selected.len() != truth.len() || truth.is_empty() {
        return Err(Error::Dimension(format!(
            "selected has length {} and truth {}",
            selected.len(),
            truth.len()
        )));
    }
    let (mut tp, mut tn, mut pos, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &t) in selected.iter().zip(truth) {
        if t {
            pos += 1;
            tp += usize::from(s);
        } else {
            neg += 1;
            tn += usize::from(!s);
        }
    }
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    Ok(SelectionMetrics {
        sensitivity: ratio(tp, pos),
        specificity: ratio(tn, neg),
        accuracy: (tp + tn) as f64 / truth.len() as f64,
    })
}

/// Effective sample size `N / (1 + 2 sum_t rho_t)` with Geyer's initial
/// positive sequence truncation, clipped to `(0, N]`.
pub fn effective_sample_size(trace: &[f64]) -> Result<f64> {
    let n = trace.len();
    if n < 10 {
        return Err(Error::InvalidArgument(format!(
            "effective sample size needs at least 10 draws, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = trace.iter().sum::<f64>() / nf;
    let centered: Vec<f64> = trace.iter().map(|x| x - mean).collect();
    let c0 = centered.iter().map(|x| x * x).sum::<f64>() / nf;
    if c0 <= 0.0 || !c0.is_finite() {
        return Ok(nf);
    }
    let rho = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / nf
            / c0
    };
    // tau = -1 + 2 * sum_m (rho_{2m} + rho_{2m+1}) while the pair sums stay positive
    let mut pair_sum = 0.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let gamma = if m == 0 { 1.0 } else { rho(2 * m) } + rho(2 * m + 1);
        if gamma <= 0.0 {
            break;
        }
        pair_sum += gamma;
        m += 1;
    }
    let tau = -1.0 + 2.0 * pair_sum;
    if tau <= 1.0 {
        return Ok(nf);
    }
    Ok((nf / tau).min(nf))
}

/// Per-feature selection stability across repeated fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub feature: String,
    pub frequency: f64,
    pub coefficient_mean: Option<f64>,
    pub coefficient_sd: Option<f64>,
    pub stable: bool,
}

pub fn stability_report(fits: &[MpmFit], names: &[String], threshold: f64) -> Result<Vec<StabilityRow>> {
    if fits.is_empty() {
        return Err(Error::InvalidArgument("stability report needs at least one fit".into()));
    }
    if fits.iter().any(|f| f.selected.len() != names.len()) {
        return Err(Error::Dimension("fits and feature names disagree in length".into()));
    }
    let total = fits.len() as f64;
    Ok(names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let coefs: Vec<f64> = fits
                .iter()
                .filter(|f| f.selected[j])
                .map(|f| f.coefficients[j])
                .collect();
            let frequency = coefs.len() as f64 / total;
            let (mean, sd) = match coefs.len() {
                0 => (None, None),
                1 => (Some(coefs[0]), None),
                m => {
                    let mean = coefs.iter().sum::<f64>() / m as f64;
                    let var =
                        coefs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
                    (Some(mean), Some(var.sqrt()))
                }
            };
            StabilityRow {
                feature: name.clone(),
                frequency,
                coefficient_mean: mean,
                coefficient_sd: sd,
                stable: frequency >= threshold,
            }
        })
        .collect())
}
