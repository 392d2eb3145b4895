//! Survival prediction from an MPM fit and censoring-weighted Brier scores.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{quantile_sorted, SurvivalDataset, TimePartition};
use crate::error::{Error, Result};
use crate::summary::MpmFit;

/// Anything that predicts `S(t | X_i)` for a fixed set of subjects.
pub trait SurvivalPredictor {
    fn subjects(&self) -> usize;

    /// `S(t | X_i)`, right-continuous in `t`.
    fn survival(&self, i: usize, t: f64) -> f64;

    /// Left limit `S(t- | X_i)`.
    fn survival_before(&self, i: usize, t: f64) -> f64 {
        self.survival(i, t)
    }

    /// Times where the prediction may jump.
    fn jump_points(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Model-based survival curves `S(t|X) = exp(-H_0(t) exp(X beta))` with a
/// piecewise-linear cumulative baseline hazard through the partition cuts.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    cuts: Vec<f64>,
    cumulative_at_cuts: Vec<f64>,
    increments: Vec<f64>,
    relative_risk: Vec<f64>,
}

impl SurvivalCurve {
    /// `H_0(t)`; beyond the last cut the last interval's rate is extended.
    pub fn baseline_cumulative_hazard(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let k_total = self.increments.len();
        // interval containing t (last one for t >= c_K)
        let k = self.cuts[1..k_total].partition_point(|&c| c <= t);
        let width = self.cuts[k + 1] - self.cuts[k];
        self.cumulative_at_cuts[k] + self.increments[k] * (t - self.cuts[k]) / width
    }

    pub fn cumulative_hazard(&self, i: usize, t: f64) -> f64 {
        self.baseline_cumulative_hazard(t) * self.relative_risk[i]
    }

    /// Whether `t` lies beyond the partition, where the curve is extrapolated.
    pub fn extrapolated(&self, t: f64) -> bool {
        t > *self.cuts.last().unwrap()
    }

    pub fn relative_risk(&self) -> &[f64] {
        &self.relative_risk
    }
}

impl SurvivalPredictor for SurvivalCurve {
    fn subjects(&self) -> usize {
        self.relative_risk.len()
    }

    fn survival(&self, i: usize, t: f64) -> f64 {
        (-self.cumulative_hazard(i, t)).exp()
    }

    fn jump_points(&self) -> Vec<f64> {
        // not jumps, but kinks of the baseline
        self.cuts.clone()
    }
}

/// Survival curves of `newdata` under the MPM coefficients and posterior-mean
/// hazard increments.
pub fn predict_survival(
    fit: &MpmFit,
    hazard_means: &[f64],
    partition: &TimePartition,
    newdata: &DMatrix<f64>,
) -> Result<SurvivalCurve> {
    if newdata.ncols() != fit.coefficients.len() {
        return Err(Error::Dimension(format!(
            "new data has {} columns but the fit has {} coefficients",
            newdata.ncols(),
            fit.coefficients.len()
        )));
    }
    if hazard_means.len() != partition.intervals() {
        return Err(Error::Dimension(format!(
            "{} hazard means for {} intervals",
            hazard_means.len(),
            partition.intervals()
        )));
    }
    if hazard_means.iter().any(|&h| !(h >= 0.0 && h.is_finite())) {
        return Err(Error::InvalidArgument("hazard means must be finite and >= 0".into()));
    }
    let mut cumulative_at_cuts = vec![0.0];
    for &h in hazard_means {
        cumulative_at_cuts.push(cumulative_at_cuts.last().unwrap() + h);
    }
    let relative_risk = (0..newdata.nrows())
        .map(|i| {
            newdata
                .row(i)
                .iter()
                .zip(&fit.coefficients)
                .map(|(x, b)| x * b)
                .sum::<f64>()
                .exp()
        })
        .collect();
    Ok(SurvivalCurve {
        cuts: partition.cuts().to_vec(),
        cumulative_at_cuts,
        increments: hazard_means.to_vec(),
        relative_risk,
    })
}

/// Right-continuous step function starting at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pub jumps: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match self.jumps.partition_point(|&s| s <= t) {
            0 => 1.0,
            k => self.values[k - 1],
        }
    }

    pub fn left_limit(&self, t: f64) -> f64 {
        match self.jumps.partition_point(|&s| s < t) {
            0 => 1.0,
            k => self.values[k - 1],
        }
    }
}

/// Kaplan-Meier product-limit estimate for the subjects flagged in `indicator`.
pub fn kaplan_meier(times: &[f64], indicator: &[bool]) -> StepFunction {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut jumps = Vec::new();
    let mut values = Vec::new();
    let mut surv = 1.0;
    let mut at_risk = times.len();
    let mut idx = 0;
    while idx < order.len() {
        let t = times[order[idx]];
        let mut d = 0usize;
        let mut tied = 0usize;
        while idx + tied < order.len() && times[order[idx + tied]] == t {
            d += usize::from(indicator[order[idx + tied]]);
            tied += 1;
        }
        if d > 0 {
            surv *= 1.0 - d as f64 / at_risk as f64;
            jumps.push(t);
            values.push(surv);
        }
        at_risk -= tied;
        idx += tied;
    }
    StepFunction { jumps, values }
}

/// Kaplan-Meier estimate `G` of the censoring distribution.
pub fn km_censoring(data: &SurvivalDataset) -> StepFunction {
    let censored: Vec<bool> = data.events().iter().map(|e| !e).collect();
    kaplan_meier(data.times(), &censored)
}

/// Covariate-free Kaplan-Meier survival prediction shared by `subjects` subjects.
#[derive(Debug, Clone, PartialEq)]
pub struct KaplanMeierPredictor {
    pub curve: StepFunction,
    pub subjects: usize,
}

impl KaplanMeierPredictor {
    pub fn fit(train: &SurvivalDataset, subjects: usize) -> Self {
        Self {
            curve: kaplan_meier(train.times(), train.events()),
            subjects,
        }
    }
}

impl SurvivalPredictor for KaplanMeierPredictor {
    fn subjects(&self) -> usize {
        self.subjects
    }

    fn survival(&self, _i: usize, t: f64) -> f64 {
        self.curve.eval(t)
    }

    fn survival_before(&self, _i: usize, t: f64) -> f64 {
        self.curve.left_limit(t)
    }

    fn jump_points(&self) -> Vec<f64> {
        self.curve.jumps.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrierPoint {
    pub t: f64,
    pub score: f64,
    /// Subjects dropped because the censoring survival they need is zero.
    pub excluded: usize,
}

fn check_predictor(pred: &dyn SurvivalPredictor, data: &SurvivalDataset) -> Result<()> {
    if pred.subjects() == data.n() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "predictions for {} subjects, data has {}",
            pred.subjects(),
            data.n()
        )))
    }
}

fn brier_at(
    t: f64,
    left: bool,
    pred: &dyn SurvivalPredictor,
    data: &SurvivalDataset,
    g: &StepFunction,
) -> BrierPoint {
    let g_t = if left { g.left_limit(t) } else { g.eval(t) };
    let mut total = 0.0;
    let mut excluded = 0;
    for (i, (&ti, &di)) in data.times().iter().zip(data.events()).enumerate() {
        let alive = if left { ti >= t } else { ti > t };
        let s = if left {
            pred.survival_before(i, t)
        } else {
            pred.survival(i, t)
        };
        let denom = if alive {
            g_t
        } else if di {
            g.left_limit(ti)
        } else {
            continue;
        };
        if denom <= 0.0 {
            excluded += 1;
            continue;
        }
        let resid = f64::from(u8::from(alive)) - s;
        total += resid * resid / denom;
    }
    BrierPoint {
        t,
        score: total / data.n() as f64,
        excluded,
    }
}

/// Censoring-weighted Brier score at time `t`.
pub fn brier_score(
    t: f64,
    pred: &dyn SurvivalPredictor,
    data: &SurvivalDataset,
    g: &StepFunction,
) -> Result<BrierPoint> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("evaluation time {t} must be >= 0")));
    }
    check_predictor(pred, data)?;
    Ok(brier_at(t, false, pred, data, g))
}

/// Grid on `[0, t_star]`: zero, `t_star`, observed times, censoring jumps and
/// the predictor's jump points.
pub fn evaluation_grid(
    t_star: f64,
    pred: &dyn SurvivalPredictor,
    data: &SurvivalDataset,
    g: &StepFunction,
) -> Vec<f64> {
    let mut grid: Vec<f64> = std::iter::once(0.0)
        .chain(std::iter::once(t_star))
        .chain(data.times().iter().copied())
        .chain(g.jumps.iter().copied())
        .chain(pred.jump_points())
        .filter(|&t| (0.0..=t_star).contains(&t))
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Brier scores on the evaluation grid.
pub fn brier_curve(
    t_star: f64,
    pred: &dyn SurvivalPredictor,
    data: &SurvivalDataset,
    g: &StepFunction,
) -> Result<Vec<BrierPoint>> {
    check_predictor(pred, data)?;
    evaluation_grid(t_star, pred, data, g)
        .into_iter()
        .map(|t| brier_score(t, pred, data, g))
        .collect()
}

/// Trapezoid rule over `grid` where each segment `[a, b]` uses `f(a)` and the
/// left limit `f_left(b)`; exact for functions that are piecewise linear
/// between grid points and jump only on them.
pub fn trapezoid_with_left_limits(
    grid: &[f64],
    f: impl Fn(f64) -> f64,
    f_left: impl Fn(f64) -> f64,
) -> f64 {
    grid.windows(2)
        .map(|w| 0.5 * (w[1] - w[0]) * (f(w[0]) + f_left(w[1])))
        .sum()
}

/// Equal subdivisions of each evaluation-grid segment used for the IBS
/// quadrature; model curves are smooth but not linear between grid points.
pub const IBS_SUBDIVISIONS: usize = 8;

fn refine(grid: &[f64], parts: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len() * parts);
    for w in grid.windows(2) {
        for s in 0..parts {
            out.push(w[0] + (w[1] - w[0]) * s as f64 / parts as f64);
        }
    }
    out.extend(grid.last());
    out
}

/// `IBS(t*) = (1/t*) int_0^{t*} BS(t) dt`, trapezoidal on the refined
/// evaluation grid.
pub fn integrated_brier_score(
    t_star: f64,
    pred: &dyn SurvivalPredictor,
    data: &SurvivalDataset,
    g: &StepFunction,
) -> Result<f64> {
    integrated_brier_score_refined(t_star, pred, data, g, IBS_SUBDIVISIONS)
}

/// IBS with each evaluation-grid segment split into `parts` equal pieces.
pub fn integrated_brier_score_refined(
    t_star: f64,
    pred: &dyn SurvivalPredictor,
    data: &SurvivalDataset,
    g: &StepFunction,
    parts: usize,
) -> Result<f64> {
    if !(t_star > 0.0 && t_star.is_finite()) {
        return Err(Error::InvalidArgument(format!("t* = {t_star} must be positive")));
    }
    if parts == 0 {
        return Err(Error::InvalidArgument("at least one part per segment".into()));
    }
    check_predictor(pred, data)?;
    let grid = refine(&evaluation_grid(t_star, pred, data, g), parts);
    let integral = trapezoid_with_left_limits(
        &grid,
        |t| brier_at(t, false, pred, data, g).score,
        |t| brier_at(t, true, pred, data, g).score,
    );
    Ok(integral / t_star)
}

/// IBS of the covariate-free Kaplan-Meier curve fitted on `train`, evaluated on `test`.
pub fn km_reference_ibs(train: &SurvivalDataset, test: &SurvivalDataset, t_star: f64) -> Result<f64> {
    let pred = KaplanMeierPredictor::fit(train, test.n());
    let g = km_censoring(test);
    integrated_brier_score(t_star, &pred, test, &g)
}

/// Default horizon: 95th percentile of the observed test times.
pub fn default_horizon(test: &SurvivalDataset) -> f64 {
    let mut sorted = test.times().to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, 0.95)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(Vec<f64>);

    impl SurvivalPredictor for Fixed {
        fn subjects(&self) -> usize {
            self.0.len()
        }
        fn survival(&self, i: usize, _t: f64) -> f64 {
            self.0[i]
        }
    }

    fn data(times: &[f64], events: &[bool]) -> SurvivalDataset {
        SurvivalDataset::new(
            times.to_vec(),
            events.to_vec(),
            DMatrix::zeros(times.len(), 1),
            vec!["x".into()],
        )
        .unwrap()
    }

    fn fit(coefs: Vec<f64>) -> MpmFit {
        let p = coefs.len();
        MpmFit {
            selected: coefs.iter().map(|&c| c != 0.0).collect(),
            inclusion_probs: vec![0.0; p],
            model_size: coefs.iter().filter(|&&c| c != 0.0).count(),
            coefficients: coefs,
        }
    }

    #[test]
    fn zero_coefficients_give_identical_curves() {
        let part = TimePartition::from_cuts(vec![0.0, 1.0, 2.0]).unwrap();
        let x = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.3, 4.0]);
        let c = predict_survival(&fit(vec![0.0, 0.0]), &[0.5, 0.2], &part, &x).unwrap();
        for t in [0.0, 0.5, 1.5, 3.0] {
            assert_eq!(c.survival(0, t), c.survival(1, t));
        }
        assert_eq!(c.survival(0, 0.0), 1.0);
        assert!((c.baseline_cumulative_hazard(1.5) - 0.6).abs() < 1e-15);
        assert!((c.baseline_cumulative_hazard(3.0) - 0.9).abs() < 1e-15);
        assert!(c.extrapolated(3.0) && !c.extrapolated(2.0));
    }

    #[test]
    fn half_survival_at_log_two() {
        let part = TimePartition::from_cuts(vec![0.0, 2.0]).unwrap();
        let x = DMatrix::from_row_slice(1, 1, &[0.7]);
        let c = predict_survival(&fit(vec![0.0]), &[2f64.ln()], &part, &x).unwrap();
        assert!((c.survival(0, 2.0) - 0.5).abs() < 1e-15);
        assert!(predict_survival(&fit(vec![0.0, 1.0]), &[1.0], &part, &x).is_err());
    }

    #[test]
    fn censoring_km() {
        let g = km_censoring(&data(&[1.0, 2.0, 3.0], &[true, true, true]));
        assert!(g.jumps.is_empty());
        assert_eq!(g.eval(10.0), 1.0);

        let times = [1.0, 2.0, 3.0, 4.0];
        let g = km_censoring(&data(&times, &[false; 4]));
        let mut expected = 1.0;
        for (i, &t) in times.iter().enumerate() {
            expected *= 1.0 - 1.0 / (4 - i) as f64;
            assert!((g.eval(t) - expected).abs() < 1e-15);
            assert!((g.eval(t + 0.5) - expected).abs() < 1e-15);
        }

        let g = km_censoring(&data(&[1.0, 2.0], &[false, true]));
        assert_eq!(g.eval(0.99), 1.0);
        assert_eq!(g.eval(1.0), 0.5);
        assert_eq!(g.eval(5.0), 0.5);
        assert_eq!(g.left_limit(1.0), 1.0);
    }

    #[test]
    fn perfect_and_constant_predictions() {
        let d = data(&[1.0, 2.0, 3.0, 4.0], &[true; 4]);
        let g = km_censoring(&d);
        let t = 2.5;
        let perfect = Fixed(d.times().iter().map(|&ti| f64::from(u8::from(ti > t))).collect());
        assert_eq!(brier_score(t, &perfect, &d, &g).unwrap().score, 0.0);
        let half = Fixed(vec![0.5; 4]);
        assert_eq!(brier_score(t, &half, &d, &g).unwrap().score, 0.25);
    }

    #[test]
    fn four_subject_hand_computation() {
        // censoring KM: G = 1 before 2, 2/3 from 2 on
        let d = data(&[1.0, 2.0, 3.0, 4.0], &[true, false, true, true]);
        let g = km_censoring(&d);
        let pred = Fixed(vec![0.2, 0.5, 0.7, 0.9]);
        let bs = brier_score(2.5, &pred, &d, &g).unwrap();
        // (1 * 0.2^2 + 0 + 1.5 * 0.3^2 + 1.5 * 0.1^2) / 4
        let want = (0.04 + 1.5 * 0.09 + 1.5 * 0.01) / 4.0;
        assert!((bs.score - want).abs() <= 1e-12);
        assert_eq!(bs.excluded, 0);

        // before the censoring: all weights 1
        let bs = brier_score(1.5, &pred, &d, &g).unwrap();
        let want = (0.04 + 0.25 + 0.09 + 0.01) / 4.0;
        assert!((bs.score - want).abs() <= 1e-12);

        // IBS over [0, 2.5]: piecewise constant in t, so integrate by hand.
        // [0,1): all alive: (0.64 + 0.25 + 0.09 + 0.01)/4 = 0.2475
        // [1,2): subject 1 dead: 0.39/4 = 0.0975
        // [2,2.5): subject 2 censored (weight 0), others alive weight 1.5
        let seg3 = (0.04 + 1.5 * 0.09 + 1.5 * 0.01) / 4.0;
        let want = (0.2475 + 0.0975 + 0.5 * seg3) / 2.5;
        let ibs = integrated_brier_score(2.5, &pred, &d, &g).unwrap();
        assert!((ibs - want).abs() <= 1e-12, "{ibs} vs {want}");
    }

    #[test]
    fn censoring_weights_near_end_of_follow_up() {
        // last subject censored: G drops to 0 at t=3
        let d = data(&[1.0, 2.0, 3.0], &[true, true, false]);
        let g = km_censoring(&d);
        assert_eq!(g.eval(3.0), 0.0);
        let pred = Fixed(vec![0.5; 3]);
        let bs = brier_score(3.5, &pred, &d, &g).unwrap();
        // subjects 1 and 2 use G(T_i-) = 1, subject 3 is censored before t
        assert_eq!(bs.excluded, 0);
        assert!((bs.score - 0.5 / 3.0).abs() < 1e-15);
        // at t = 2.5 subject 3 is alive and needs G(2.5) = 1
        let bs = brier_score(2.5, &pred, &d, &g).unwrap();
        assert_eq!(bs.excluded, 0);

        // a subject with event at the time G hits zero is weighted by the left limit
        let d = data(&[1.0, 2.0, 2.0], &[true, false, true]);
        let g = km_censoring(&d);
        let bs = brier_score(2.0, &Fixed(vec![0.5; 3]), &d, &g).unwrap();
        assert_eq!(bs.excluded, 0);
    }

    #[test]
    fn trapezoid_exactness() {
        let grid = [0.0, 0.3, 1.0, 2.0];
        let c = trapezoid_with_left_limits(&grid, |_| 0.7, |_| 0.7);
        assert!((c / 2.0 - 0.7).abs() < 1e-15);
        let lin = trapezoid_with_left_limits(&grid, |t| 0.4 * t / 2.0, |t| 0.4 * t / 2.0);
        assert!((lin / 2.0 - 0.2).abs() < 1e-15);
    }

    #[test]
    fn model_ibs_matches_fine_riemann_sum() {
        let times = [0.4, 0.9, 1.3, 1.8, 2.2, 2.9];
        let events = [true, false, true, true, false, true];
        let x = DMatrix::from_row_slice(6, 1, &[0.5, -0.2, 1.0, 0.0, -0.8, 0.3]);
        let d = SurvivalDataset::new(times.to_vec(), events.to_vec(), x.clone(), vec!["x".into()])
            .unwrap();
        let part = TimePartition::from_cuts(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let curve = predict_survival(&fit(vec![0.6]), &[0.3, 0.5, 0.4], &part, &x).unwrap();
        let g = km_censoring(&d);
        let t_star = 2.5;
        let ibs = integrated_brier_score(t_star, &curve, &d, &g).unwrap();
        let m = 10_000;
        let riemann: f64 = (0..m)
            .map(|k| {
                let t = (k as f64 + 0.5) * t_star / m as f64;
                brier_score(t, &curve, &d, &g).unwrap().score
            })
            .sum::<f64>()
            / m as f64;
        assert!((ibs - riemann).abs() < 1e-3, "{ibs} vs {riemann}");
    }

    #[test]
    fn km_reference_single_event_time() {
        let d = data(&[2.0, 2.0, 2.0], &[true, true, true]);
        let pred = KaplanMeierPredictor::fit(&d, 3);
        let g = km_censoring(&d);
        for t in [0.5, 2.0, 3.0] {
            assert_eq!(brier_score(t, &pred, &d, &g).unwrap().score, 0.0);
        }
        assert_eq!(km_reference_ibs(&d, &d, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn km_reference_hand_computation() {
        // KM: 1 on [0,1), 2/3 on [1,2), 1/3 on [2,3), 0 from 3
        let d = data(&[1.0, 2.0, 3.0], &[true, true, true]);
        let ibs = km_reference_ibs(&d, &d, 3.0).unwrap();
        // BS on [0,1): 0; [1,2): (4/9 + 1/9 + 1/9)/3 = 2/9; [2,3): (1/9+1/9+4/9)/3 = 2/9
        let want = (2.0 / 9.0 + 2.0 / 9.0) / 3.0;
        assert!((ibs - want).abs() < 1e-12, "{ibs} vs {want}");
    }

    #[test]
    fn default_horizon_is_95th_percentile() {
        let times: Vec<f64> = (1..=21).map(f64::from).collect();
        let d = data(&times, &vec![true; 21]);
        assert!((default_horizon(&d) - 20.0).abs() < 1e-12);
    }
}
