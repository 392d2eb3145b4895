//! Grouped-data Cox likelihood.
//!
//! Subject `i` falling in interval `k_i` contributes `-H_i exp(x_i'beta)` with
//! exposure `H_i = sum_{k < k_i} h_k + (1 - delta_i) h_{k_i}`, plus the event
//! term `log(1 - exp(-h_{k_i} exp(x_i'beta)))` when `delta_i = 1`. Summing by
//! subject is the same as the interval-wise product over `R_k \ D_k` and `D_k`.

use crate::data::{IntervalSets, SurvivalDataset};
use crate::error::{Error, Result};

/// Value and first two derivatives of a subject's log-likelihood term with
/// respect to its linear predictor.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CoordinateTerms {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

/// `log(1 - exp(-mu))` with its first and second derivative in `eta`, where
/// `mu = h exp(eta)`. With `q = mu / (exp(mu) - 1)` the derivatives are `q` and
/// `q (1 - mu - q)`; both are non-positive-curvature terms.
#[inline]
fn event_terms(mu: f64) -> (f64, f64, f64) {
    if mu == 0.0 {
        return (f64::NEG_INFINITY, 1.0, 0.0);
    }
    if !mu.is_finite() {
        return (0.0, 0.0, 0.0);
    }
    let em = (-mu).exp();
    // 1 - exp(-mu), cancellation-free for small mu
    let m1 = if mu < 0.5 { -(-mu).exp_m1() } else { 1.0 - em };
    let q = mu * em / m1;
    (m1.ln(), q, q * (1.0 - mu - q))
}

fn check_hazard(h: &[f64], sets: &IntervalSets) -> Result<()> {
    if h.len() != sets.intervals() {
        return Err(Error::Dimension(format!(
            "{} hazard increments for {} intervals",
            h.len(),
            sets.intervals()
        )));
    }
    if let Some(k) = h.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "hazard increment h_{} = {} must be positive",
            k + 1,
            h[k]
        )));
    }
    Ok(())
}

/// Per-subject exposure `H_i` and event-interval increment `h_{k_i}` (zero for
/// censored subjects).
fn exposures(h: &[f64], data: &SurvivalDataset, sets: &IntervalSets) -> (Vec<f64>, Vec<f64>) {
    let mut prefix = Vec::with_capacity(h.len() + 1);
    prefix.push(0.0);
    for &hk in h {
        prefix.push(prefix.last().unwrap() + hk);
    }
    let mut exposure = Vec::with_capacity(data.n());
    let mut event_h = Vec::with_capacity(data.n());
    for (i, &k) in sets.interval_of().iter().enumerate() {
        if data.events()[i] {
            exposure.push(prefix[k]);
            event_h.push(h[k]);
        } else {
            exposure.push(prefix[k + 1]);
            event_h.push(0.0);
        }
    }
    (exposure, event_h)
}

fn linear_predictors(beta: &[f64], data: &SurvivalDataset) -> Vec<f64> {
    let mut eta = vec![0.0; data.n()];
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            for (e, &x) in eta.iter_mut().zip(data.column(j)) {
                *e += b * x;
            }
        }
    }
    eta
}

fn check_beta(beta: &[f64], data: &SurvivalDataset) -> Result<()> {
    if beta.len() == data.p() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "beta has length {} but data has {} covariates",
            beta.len(),
            data.p()
        )))
    }
}

/// Grouped-data log-likelihood `log L(D | beta, h)`. Returns `-inf` when an
/// event probability underflows to zero.
pub fn log_likelihood(
    beta: &[f64],
    h: &[f64],
    data: &SurvivalDataset,
    sets: &IntervalSets,
) -> Result<f64> {
    check_beta(beta, data)?;
    check_hazard(h, sets)?;
    let mut ws = LikelihoodWorkspace::new(data, sets, h)?;
    ws.set_beta(beta);
    Ok(ws.log_likelihood())
}

/// First and second derivative in `beta_j` of the log-likelihood plus the
/// normal prior term with variance `prior_variance`.
pub fn log_likelihood_grad_hess_beta_j(
    j: usize,
    beta: &[f64],
    h: &[f64],
    data: &SurvivalDataset,
    sets: &IntervalSets,
    prior_variance: f64,
) -> Result<(f64, f64)> {
    check_beta(beta, data)?;
    check_hazard(h, sets)?;
    if j >= data.p() {
        return Err(Error::Dimension(format!("coordinate {j} out of range")));
    }
    let mut ws = LikelihoodWorkspace::new(data, sets, h)?;
    ws.set_beta(beta);
    let t = ws.coordinate_terms(j, 0.0);
    Ok((
        t.first - beta[j] / prior_variance,
        t.second - 1.0 / prior_variance,
    ))
}

/// Log-likelihood term of one subject and its derivatives in the linear predictor.
#[inline]
fn subject_terms(exposure: f64, event_h: f64, e: f64) -> (f64, f64, f64) {
    // zero exposure contributes nothing, even when e overflows
    let censor = if exposure > 0.0 { exposure * e } else { 0.0 };
    if event_h > 0.0 {
        let (v, q, q2) = event_terms(event_h * e);
        (v - censor, q - censor, q2 - censor)
    } else {
        (-censor, -censor, -censor)
    }
}

/// Per-subject cache: linear predictor, its exponential, and the subject's
/// log-likelihood term with first and second derivative in the predictor.
#[derive(Debug, Clone, Default)]
struct SubjectCache {
    eta: Vec<f64>,
    exp_eta: Vec<f64>,
    value: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl SubjectCache {
    fn zeros(n: usize) -> Self {
        Self {
            eta: vec![0.0; n],
            exp_eta: vec![1.0; n],
            value: vec![0.0; n],
            d1: vec![0.0; n],
            d2: vec![0.0; n],
        }
    }
}

/// Cached linear predictors and exposures for one chain.
///
/// Besides `exp(x_i'beta)` the workspace keeps every subject's likelihood term
/// and derivatives, so derivatives at the current point cost two dot products.
/// A proposal for one coordinate is evaluated into a scratch cache that
/// replaces the live one on acceptance.
#[derive(Debug, Clone)]
pub struct LikelihoodWorkspace<'a> {
    data: &'a SurvivalDataset,
    sets: &'a IntervalSets,
    exposure: Vec<f64>,
    event_h: Vec<f64>,
    cache: SubjectCache,
    scratch: SubjectCache,
    scratch_coordinate: Option<(usize, f64)>,
}

impl<'a> LikelihoodWorkspace<'a> {
    /// Workspace at `beta = 0`.
    pub fn new(data: &'a SurvivalDataset, sets: &'a IntervalSets, h: &[f64]) -> Result<Self> {
        if sets.interval_of().len() != data.n() {
            return Err(Error::Dimension("interval sets built for another dataset".into()));
        }
        check_hazard(h, sets)?;
        let (exposure, event_h) = exposures(h, data, sets);
        let mut ws = Self {
            data,
            sets,
            exposure,
            event_h,
            cache: SubjectCache::zeros(data.n()),
            scratch: SubjectCache::zeros(data.n()),
            scratch_coordinate: None,
        };
        ws.refresh_terms();
        Ok(ws)
    }

    fn refresh_terms(&mut self) {
        let c = &mut self.cache;
        for i in 0..c.eta.len() {
            let (v, d1, d2) = subject_terms(self.exposure[i], self.event_h[i], c.exp_eta[i]);
            c.value[i] = v;
            c.d1[i] = d1;
            c.d2[i] = d2;
        }
        self.scratch_coordinate = None;
    }

    pub fn linear_predictors(&self) -> &[f64] {
        &self.cache.eta
    }

    pub fn exp_lp(&self) -> &[f64] {
        &self.cache.exp_eta
    }

    /// Recomputes all linear predictors from scratch.
    pub fn set_beta(&mut self, beta: &[f64]) {
        self.cache.eta = linear_predictors(beta, self.data);
        self.cache.exp_eta = self.cache.eta.iter().map(|e| e.exp()).collect();
        self.refresh_terms();
    }

    pub fn set_hazard(&mut self, h: &[f64]) {
        debug_assert_eq!(h.len(), self.sets.intervals());
        let (exposure, event_h) = exposures(h, self.data, self.sets);
        self.exposure = exposure;
        self.event_h = event_h;
        self.refresh_terms();
    }

    pub fn log_likelihood(&self) -> f64 {
        self.cache.value.iter().sum()
    }

    /// Log-likelihood and its first two derivatives in `beta_j`, evaluated at
    /// the current coefficients with `beta_j` shifted by `delta`.
    pub fn coordinate_terms(&self, j: usize, delta: f64) -> CoordinateTerms {
        let x = self.data.column(j);
        let mut out = CoordinateTerms::default();
        if delta == 0.0 {
            let c = &self.cache;
            for i in 0..x.len() {
                out.value += c.value[i];
                out.first += x[i] * c.d1[i];
                out.second += x[i] * x[i] * c.d2[i];
            }
            return out;
        }
        for i in 0..x.len() {
            let e = (self.cache.eta[i] + delta * x[i]).exp();
            let (v, d1, d2) = subject_terms(self.exposure[i], self.event_h[i], e);
            out.value += v;
            out.first += x[i] * d1;
            out.second += x[i] * x[i] * d2;
        }
        out
    }

    /// Same as `coordinate_terms`, but keeps the per-subject results so that
    /// `accept_proposal` can adopt them without recomputation.
    pub fn propose(&mut self, j: usize, delta: f64) -> CoordinateTerms {
        let x = self.data.column(j);
        let (c, s) = (&self.cache, &mut self.scratch);
        let mut out = CoordinateTerms::default();
        for i in 0..x.len() {
            let eta = c.eta[i] + delta * x[i];
            let e = eta.exp();
            let (v, d1, d2) = subject_terms(self.exposure[i], self.event_h[i], e);
            s.eta[i] = eta;
            s.exp_eta[i] = e;
            s.value[i] = v;
            s.d1[i] = d1;
            s.d2[i] = d2;
            out.value += v;
            out.first += x[i] * d1;
            out.second += x[i] * x[i] * d2;
        }
        self.scratch_coordinate = Some((j, delta));
        out
    }

    /// Adopts the last `propose(j, delta)`.
    pub fn accept_proposal(&mut self, j: usize, delta: f64) {
        if self.scratch_coordinate == Some((j, delta)) {
            std::mem::swap(&mut self.cache, &mut self.scratch);
            self.scratch_coordinate = None;
        } else {
            self.shift_coordinate(j, delta);
        }
    }

    /// Applies `beta_j += delta` to the cached predictors.
    pub fn shift_coordinate(&mut self, j: usize, delta: f64) {
        let x = self.data.column(j);
        let c = &mut self.cache;
        for i in 0..x.len() {
            if x[i] != 0.0 {
                c.eta[i] += delta * x[i];
                c.exp_eta[i] = c.eta[i].exp();
                let (v, d1, d2) = subject_terms(self.exposure[i], self.event_h[i], c.exp_eta[i]);
                c.value[i] = v;
                c.d1[i] = d1;
                c.d2[i] = d2;
            }
        }
        self.scratch_coordinate = None;
    }

    /// `sum_{l in R_k \ D_k} exp(x_l'beta)` for every interval.
    pub fn interval_risk_sums(&self) -> Vec<f64> {
        let k_total = self.sets.intervals();
        // subject i is in R_k \ D_k for k < k_i, and for k = k_i when censored
        let mut add_through = vec![0.0; k_total + 1];
        for (i, &ki) in self.sets.interval_of().iter().enumerate() {
            let last = if self.data.events()[i] { ki } else { ki + 1 };
            add_through[last] += self.cache.exp_eta[i];
        }
        let mut sums = vec![0.0; k_total];
        let mut running = 0.0;
        for k in (0..k_total).rev() {
            running += add_through[k + 1];
            sums[k] = running;
        }
        sums
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{interval_sets, TimePartition};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Interval-by-interval transcription of the grouped likelihood product.
    fn product_formula(
        beta: &[f64],
        h: &[f64],
        data: &SurvivalDataset,
        sets: &IntervalSets,
    ) -> f64 {
        let eta = |l: usize| -> f64 {
            (0..data.p()).map(|j| data.covariates()[(l, j)] * beta[j]).sum()
        };
        let mut lik = 1.0;
        for k in 0..h.len() {
            let failures = &sets.failure_sets()[k];
            let censor_sum: f64 = sets.risk_sets()[k]
                .iter()
                .filter(|l| !failures.contains(l))
                .map(|&l| eta(l).exp())
                .sum();
            lik *= (-h[k] * censor_sum).exp();
            for &l in failures {
                lik *= 1.0 - (-h[k] * eta(l).exp()).exp();
            }
        }
        lik.ln()
    }

    fn toy() -> (SurvivalDataset, TimePartition) {
        let x = DMatrix::from_row_slice(4, 2, &[0.5, -1.0, 1.2, 0.3, -0.4, 0.8, 0.0, -0.6]);
        let d = SurvivalDataset::new(
            vec![0.7, 1.4, 2.2, 3.0],
            vec![true, false, true, true],
            x,
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let p = TimePartition::from_cuts(vec![0.0, 1.5, 3.5]).unwrap();
        (d, p)
    }

    #[test]
    fn matches_product_formula() {
        let (d, p) = toy();
        let s = interval_sets(&d, &p).unwrap();
        let beta = [0.3, -0.8];
        let h = [0.4, 0.9];
        let ll = log_likelihood(&beta, &h, &d, &s).unwrap();
        let want = product_formula(&beta, &h, &d, &s);
        assert!((ll - want).abs() < 1e-12, "{ll} vs {want}");
    }

    #[test]
    fn single_event_at_log_two() {
        let d = SurvivalDataset::new(
            vec![1.0, 3.0],
            vec![true, false],
            DMatrix::from_row_slice(2, 1, &[0.0, 0.0]),
            vec!["x".into()],
        )
        .unwrap();
        let p = TimePartition::from_cuts(vec![0.0, 2.0, 3.5]).unwrap();
        let s = interval_sets(&d, &p).unwrap();
        // subject 2 contributes -(h1 + h2)
        let ll = log_likelihood(&[0.0], &[2f64.ln(), 1.0], &d, &s).unwrap();
        assert!((ll - (0.5f64.ln() - 2f64.ln() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn all_censored_closed_form() {
        let (d, p) = toy();
        let d = SurvivalDataset::new(
            d.times().to_vec(),
            vec![false; 4],
            d.covariates().clone(),
            d.feature_names().to_vec(),
        )
        .unwrap();
        let s = interval_sets(&d, &p).unwrap();
        let beta = [0.2, 0.5];
        let h = [0.3, 0.6];
        let ll = log_likelihood(&beta, &h, &d, &s).unwrap();
        let mut want = 0.0;
        for k in 0..2 {
            for &l in &s.risk_sets()[k] {
                let e: f64 = (0.2 * d.covariates()[(l, 0)] + 0.5 * d.covariates()[(l, 1)]).exp();
                want -= h[k] * e;
            }
        }
        assert!((ll - want).abs() < 1e-12);

        let var = 0.7;
        let (g1, g2) = log_likelihood_grad_hess_beta_j(1, &beta, &h, &d, &s, var).unwrap();
        let mut want1 = -beta[1] / var;
        for k in 0..2 {
            for &l in &s.risk_sets()[k] {
                let x = d.covariates()[(l, 1)];
                let e: f64 = (0.2 * d.covariates()[(l, 0)] + 0.5 * x).exp();
                want1 -= h[k] * x * e;
            }
        }
        assert!((g1 - want1).abs() < 1e-12);
        assert!(g2 < 0.0);
        // more hazard, lower likelihood when nobody fails
        let ll2 = log_likelihood(&beta, &[0.3, 0.61], &d, &s).unwrap();
        assert!(ll2 < ll);
    }

    #[test]
    fn underflowing_event_gives_negative_infinity() {
        let d = SurvivalDataset::new(
            vec![1.0, 2.0],
            vec![true, true],
            DMatrix::from_row_slice(2, 1, &[-800.0, 0.0]),
            vec!["x".into()],
        )
        .unwrap();
        let p = TimePartition::from_cuts(vec![0.0, 3.0]).unwrap();
        let s = interval_sets(&d, &p).unwrap();
        let ll = log_likelihood(&[1.0], &[1.0], &d, &s).unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
        // large mu is finite
        let ll = log_likelihood(&[-1.0], &[1.0], &d, &s).unwrap();
        assert!(ll.is_finite());
    }

    #[test]
    fn rejects_non_positive_hazard() {
        let (d, p) = toy();
        let s = interval_sets(&d, &p).unwrap();
        assert!(log_likelihood(&[0.0, 0.0], &[0.0, 1.0], &d, &s).is_err());
        assert!(log_likelihood(&[0.0, 0.0], &[1.0], &d, &s).is_err());
        assert!(log_likelihood(&[0.0], &[1.0, 1.0], &d, &s).is_err());
    }

    #[test]
    fn event_derivatives_match_finite_differences() {
        for &mu in &[1e-6, 0.01, 0.49, 0.51, 2.0, 30.0] {
            let f = |eta: f64| (-(-mu * f64::exp(eta)).exp_m1()).ln();
            let step = 1e-4;
            let d1 = (f(step) - f(-step)) / (2.0 * step);
            let d2 = (f(step) - 2.0 * f(0.0) + f(-step)) / (step * step);
            let (v, q, q2) = event_terms(mu);
            assert!((v - f(0.0)).abs() < 1e-12 * (1.0 + v.abs()), "mu={mu}");
            assert!((q - d1).abs() < 1e-6 * (1.0 + d1.abs()), "mu={mu}");
            assert!((q2 - d2).abs() < 1e-4 * (1.0 + d2.abs()), "mu={mu}: {q2} vs {d2}");
        }
        assert_eq!(event_terms(1e6), (0.0, 0.0, 0.0));
        assert_eq!(event_terms(f64::INFINITY), (0.0, 0.0, 0.0));
    }

    #[test]
    fn workspace_shift_matches_recompute() {
        let (d, p) = toy();
        let s = interval_sets(&d, &p).unwrap();
        let h = [0.4, 0.9];
        let mut ws = LikelihoodWorkspace::new(&d, &s, &h).unwrap();
        let mut beta = vec![0.1, -0.2];
        ws.set_beta(&beta);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let j = rng.random_range(0..2);
            let delta: f64 = rng.random_range(-0.3..0.3);
            let predicted = ws.coordinate_terms(j, delta).value;
            ws.shift_coordinate(j, delta);
            beta[j] += delta;
            assert!((predicted - ws.log_likelihood()).abs() < 1e-12);
        }
        let fresh = log_likelihood(&beta, &h, &d, &s).unwrap();
        assert!((ws.log_likelihood() - fresh).abs() < 1e-9);
    }

    #[test]
    fn risk_sums_match_sets() {
        let (d, p) = toy();
        let s = interval_sets(&d, &p).unwrap();
        let mut ws = LikelihoodWorkspace::new(&d, &s, &[1.0, 1.0]).unwrap();
        ws.set_beta(&[0.4, -0.3]);
        let sums = ws.interval_risk_sums();
        for k in 0..2 {
            let want: f64 = s.risk_sets()[k]
                .iter()
                .filter(|l| !s.failure_sets()[k].contains(l))
                .map(|&l| ws.exp_lp()[l])
                .sum();
            assert!((sums[k] - want).abs() < 1e-12);
        }
    }
}
