//! Survival data containers, the time-axis partition and CSV ingestion.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default number of intervals of the baseline-hazard partition.
pub const DEFAULT_INTERVALS: usize = 20;

/// Relative inflation of the largest observed time used for the last cut.
const LAST_CUT_INFLATION: f64 = 1e-6;

/// Right-censored observations `(T_i, delta_i, X_i)` for `n` subjects.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    times: Vec<f64>,
    events: Vec<bool>,
    covariates: DMatrix<f64>,
    feature_names: Vec<String>,
}

impl SurvivalDataset {
    pub fn new(
        times: Vec<f64>,
        events: Vec<bool>,
        covariates: DMatrix<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = times.len();
        if n < 2 {
            return Err(Error::InvalidData(format!("need at least 2 subjects, got {n}")));
        }
        if events.len() != n || covariates.nrows() != n {
            return Err(Error::Dimension(format!(
                "times has {n} entries, events {}, covariate rows {}",
                events.len(),
                covariates.nrows()
            )));
        }
        if covariates.ncols() == 0 {
            return Err(Error::InvalidData("need at least one covariate".into()));
        }
        if feature_names.len() != covariates.ncols() {
            return Err(Error::Dimension(format!(
                "{} feature names for {} covariate columns",
                feature_names.len(),
                covariates.ncols()
            )));
        }
        if let Some(i) = times.iter().position(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidData(format!(
                "time of subject {} is {}; times must be finite and positive",
                i + 1,
                times[i]
            )));
        }
        if let Some(idx) = covariates.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidData(format!(
                "covariate of subject {} in column {} is not finite",
                idx % n + 1,
                idx / n + 1
            )));
        }
        Ok(Self {
            times,
            events,
            covariates,
            feature_names,
        })
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    /// Column `j` of the design matrix as a contiguous slice.
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.covariates.as_slice()[j * n..(j + 1) * n]
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn event_count(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    pub fn max_time(&self) -> f64 {
        self.times.iter().copied().fold(f64::MIN, f64::max)
    }

    /// Reads a `time,status,<features...>` CSV file.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, &path.display().to_string())
    }

    pub fn from_reader<R: std::io::Read>(reader: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let format_err = |message: String| Error::Format {
            path: source.to_owned(),
            message,
        };
        if headers.first().map(String::as_str) != Some("time") {
            return Err(format_err("first column must be named `time`".into()));
        }
        if headers.get(1).map(String::as_str) != Some("status") {
            return Err(format_err("second column must be named `status`".into()));
        }
        let feature_names = headers[2..].to_vec();
        if feature_names.is_empty() {
            return Err(format_err("no feature columns after `time,status`".into()));
        }
        let p = feature_names.len();

        let mut times = Vec::new();
        let mut events = Vec::new();
        let mut rows: Vec<f64> = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let row = r + 1;
            let record = record?;
            if record.len() != p + 2 {
                return Err(Error::Parse {
                    path: source.to_owned(),
                    row,
                    column: String::new(),
                    message: format!("expected {} fields, found {}", p + 2, record.len()),
                });
            }
            let parse = |col: usize| -> Result<f64> {
                let cell = &record[col];
                cell.parse::<f64>().map_err(|_| Error::Parse {
                    path: source.to_owned(),
                    row,
                    column: headers[col].clone(),
                    message: format!("`{cell}` is not a number"),
                })
            };
            let t = parse(0)?;
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Parse {
                    path: source.to_owned(),
                    row,
                    column: "time".into(),
                    message: format!("time must be finite and positive, got {t}"),
                });
            }
            let status = match &record[1] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Parse {
                        path: source.to_owned(),
                        row,
                        column: "status".into(),
                        message: format!("status must be 0 or 1, got `{other}`"),
                    })
                }
            };
            times.push(t);
            events.push(status);
            for col in 2..p + 2 {
                let x = parse(col)?;
                if !x.is_finite() {
                    return Err(Error::Parse {
                        path: source.to_owned(),
                        row,
                        column: headers[col].clone(),
                        message: format!("covariate must be finite, got {x}"),
                    });
                }
                rows.push(x);
            }
        }
        let n = times.len();
        let covariates = DMatrix::from_row_slice(n, p, &rows);
        Self::new(times, events, covariates, feature_names)
    }

    /// Writes the dataset in the same CSV layout `load_csv` reads. Values use the
    /// shortest decimal representation that round-trips exactly.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write!(w, "time,status")?;
        for name in &self.feature_names {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for i in 0..self.n() {
            write!(w, "{},{}", self.times[i], u8::from(self.events[i]))?;
            for j in 0..self.p() {
                write!(w, ",{}", self.covariates[(i, j)])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Finite partition `0 = c_0 < c_1 < ... < c_K` of the time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TimePartition {
    cuts: Vec<f64>,
}

impl TimePartition {
    /// Builds a partition from the full cut vector, including the leading zero.
    pub fn from_cuts(cuts: Vec<f64>) -> Result<Self> {
        if cuts.len() < 2 {
            return Err(Error::InvalidArgument(
                "a partition needs at least the cuts 0 and c_K".into(),
            ));
        }
        if cuts[0] != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "first cut must be 0, got {}",
                cuts[0]
            )));
        }
        if cuts.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidArgument(
                "cuts must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self { cuts })
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    /// Number of intervals `K`.
    pub fn intervals(&self) -> usize {
        self.cuts.len() - 1
    }

    pub fn last_cut(&self) -> f64 {
        self.cuts[self.cuts.len() - 1]
    }

    /// Zero-based index `k` with `t` in `[c_k, c_{k+1})`. Times at or beyond the
    /// last cut map to the last interval.
    pub fn interval_of(&self, t: f64) -> usize {
        let k = self.intervals();
        // number of interior cuts c_1..c_{K-1} that are <= t
        let interior = &self.cuts[1..k];
        interior.partition_point(|&c| c <= t)
    }

    pub fn width(&self, k: usize) -> f64 {
        self.cuts[k + 1] - self.cuts[k]
    }
}

/// Type-7 (linear interpolation) empirical quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * level;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// Quantile partition of the observed times with `k` intervals.
///
/// Interior cuts are the empirical quantiles at levels `j/k`; the last cut is
/// `max(T) * (1 + 1e-6)`. Duplicate cuts, and interior cuts at or above the
/// largest observed time, are dropped so the resulting partition may have fewer
/// than `k` intervals.
pub fn build_partition(data: &SurvivalDataset, k: usize) -> Result<TimePartition> {
    if k == 0 {
        return Err(Error::InvalidArgument("number of intervals must be >= 1".into()));
    }
    let mut sorted = data.times().to_vec();
    sorted.sort_by(f64::total_cmp);
    let max_t = sorted[sorted.len() - 1];

    let mut cuts = vec![0.0];
    for j in 1..k {
        let q = quantile_sorted(&sorted, j as f64 / k as f64);
        if q > *cuts.last().unwrap() && q < max_t {
            cuts.push(q);
        }
    }
    cuts.push(max_t * (1.0 + LAST_CUT_INFLATION));
    let partition = TimePartition::from_cuts(cuts)?;
    if partition.intervals() < k {
        warn!(
            "partition collapsed from {k} to {} intervals (tied observed times)",
            partition.intervals()
        );
    }
    Ok(partition)
}

/// Risk and failure sets of every interval of a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSets {
    interval_of: Vec<usize>,
    risk_sets: Vec<Vec<usize>>,
    failure_sets: Vec<Vec<usize>>,
    d_counts: Vec<usize>,
}

impl IntervalSets {
    /// Zero-based interval of each subject.
    pub fn interval_of(&self) -> &[usize] {
        &self.interval_of
    }

    /// `R_k`: subjects with `T_i >= c_{k-1}` (zero-based `k`).
    pub fn risk_sets(&self) -> &[Vec<usize>] {
        &self.risk_sets
    }

    /// `D_k`: subjects with an event inside interval `k`.
    pub fn failure_sets(&self) -> &[Vec<usize>] {
        &self.failure_sets
    }

    pub fn d_counts(&self) -> &[usize] {
        &self.d_counts
    }

    pub fn intervals(&self) -> usize {
        self.d_counts.len()
    }
}

pub fn interval_sets(data: &SurvivalDataset, partition: &TimePartition) -> Result<IntervalSets> {
    let k_total = partition.intervals();
    if data.max_time() > partition.last_cut() {
        return Err(Error::InvalidArgument(format!(
            "observed time {} lies beyond the last cut {}",
            data.max_time(),
            partition.last_cut()
        )));
    }
    let interval_of: Vec<usize> = data.times().iter().map(|&t| partition.interval_of(t)).collect();
    let mut risk_sets = vec![Vec::new(); k_total];
    let mut failure_sets = vec![Vec::new(); k_total];
    for (i, &ki) in interval_of.iter().enumerate() {
        for set in risk_sets.iter_mut().take(ki + 1) {
            set.push(i);
        }
        if data.events()[i] {
            failure_sets[ki].push(i);
        }
    }
    let d_counts = failure_sets.iter().map(Vec::len).collect();
    Ok(IntervalSets {
        interval_of,
        risk_sets,
        failure_sets,
        d_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(times: &[f64], events: &[u8]) -> SurvivalDataset {
        let n = times.len();
        SurvivalDataset::new(
            times.to_vec(),
            events.iter().map(|&e| e == 1).collect(),
            DMatrix::zeros(n, 1),
            vec!["x1".into()],
        )
        .unwrap()
    }

    #[test]
    fn loads_three_row_file() {
        let text = "time,status,x1\n1.0,1,0.5\n2.0,0,-1\n0.5,1,2\n";
        let d = SurvivalDataset::from_reader(text.as_bytes(), "mem").unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.p(), 1);
        assert_eq!(d.times(), &[1.0, 2.0, 0.5]);
        assert_eq!(d.events(), &[true, false, true]);
        assert_eq!(d.column(0), &[0.5, -1.0, 2.0]);
    }

    #[test]
    fn zero_time_names_row() {
        let text = "time,status,x1\n1.0,1,0.5\n0,0,-1\n";
        let err = SurvivalDataset::from_reader(text.as_bytes(), "mem").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2"), "{msg}");
        assert!(msg.contains("time"), "{msg}");
    }

    #[test]
    fn bad_status_names_value() {
        let text = "time,status,x1\n1.0,2,0.5\n2.0,0,-1\n";
        let msg = SurvivalDataset::from_reader(text.as_bytes(), "mem")
            .unwrap_err()
            .to_string();
        assert!(msg.contains("`2`"), "{msg}");
        assert!(msg.contains("row 1"), "{msg}");
    }

    #[test]
    fn non_numeric_cell_and_missing_columns() {
        let text = "time,status,x1\n1.0,1,abc\n2.0,0,-1\n";
        let msg = SurvivalDataset::from_reader(text.as_bytes(), "mem")
            .unwrap_err()
            .to_string();
        assert!(msg.contains("column `x1`") && msg.contains("abc"), "{msg}");

        let text = "t,status,x1\n1.0,1,1\n";
        assert!(SurvivalDataset::from_reader(text.as_bytes(), "mem").is_err());
        let text = "time,status\n1.0,1\n2.0,1\n";
        assert!(SurvivalDataset::from_reader(text.as_bytes(), "mem").is_err());
    }

    #[test]
    fn partition_median_cut() {
        let d = dataset(&[1.0, 2.0, 3.0, 4.0], &[1, 1, 1, 1]);
        let p = build_partition(&d, 2).unwrap();
        assert_eq!(p.cuts(), &[0.0, 2.5, 4.0 * (1.0 + 1e-6)]);
    }

    #[test]
    fn partition_collapses_ties() {
        let d = dataset(&[5.0; 6], &[1, 0, 1, 0, 1, 1]);
        let p = build_partition(&d, 4).unwrap();
        assert_eq!(p.intervals(), 1);
        assert_eq!(p.cuts(), &[0.0, 5.0 * (1.0 + 1e-6)]);
    }

    #[test]
    fn partition_of_hundred_times() {
        let times: Vec<f64> = (1..=100).map(f64::from).collect();
        let d = dataset(&times, &[1; 100]);
        let p = build_partition(&d, 20).unwrap();
        assert_eq!(p.intervals(), 20);
        assert!(p.last_cut() > 100.0);
        // direct type-7 quantile: 1 + 99 * j / 20
        for j in 1..20 {
            let expected = 1.0 + 99.0 * j as f64 / 20.0;
            assert!((p.cuts()[j] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn partition_rejects_zero_intervals() {
        let d = dataset(&[1.0, 2.0], &[1, 1]);
        assert!(build_partition(&d, 0).is_err());
    }

    #[test]
    fn interval_sets_hand_enumeration() {
        let d = dataset(&[1.0, 2.0, 3.0], &[1, 1, 1]);
        let p = TimePartition::from_cuts(vec![0.0, 2.5, 3.1]).unwrap();
        let s = interval_sets(&d, &p).unwrap();
        assert_eq!(s.failure_sets(), &[vec![0, 1], vec![2]]);
        assert_eq!(s.risk_sets(), &[vec![0, 1, 2], vec![2]]);
        assert_eq!(s.d_counts(), &[2, 1]);
    }

    #[test]
    fn interval_sets_all_censored() {
        let d = dataset(&[1.0, 2.0, 3.0], &[0, 0, 0]);
        let p = TimePartition::from_cuts(vec![0.0, 1.5, 2.5, 3.5]).unwrap();
        let s = interval_sets(&d, &p).unwrap();
        assert!(s.failure_sets().iter().all(Vec::is_empty));
        assert_eq!(s.risk_sets()[0], vec![0, 1, 2]);
    }

    #[test]
    fn interval_sets_single_subject() {
        let d = SurvivalDataset::new(
            vec![1.0, 1.5],
            vec![true, false],
            DMatrix::zeros(2, 1),
            vec!["x".into()],
        )
        .unwrap();
        let p = TimePartition::from_cuts(vec![0.0, 2.0]).unwrap();
        let s = interval_sets(&d, &p).unwrap();
        assert_eq!(s.failure_sets()[0], vec![0]);
        assert_eq!(s.risk_sets()[0], vec![0, 1]);
    }

    #[test]
    fn cut_ties_go_right_and_last_cut_maps_to_last_interval() {
        let p = TimePartition::from_cuts(vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(p.interval_of(0.5), 0);
        assert_eq!(p.interval_of(1.0), 1);
        assert_eq!(p.interval_of(2.0), 1);
    }

    #[test]
    fn rejects_times_beyond_partition() {
        let d = dataset(&[1.0, 3.0], &[1, 1]);
        let p = TimePartition::from_cuts(vec![0.0, 2.0]).unwrap();
        assert!(interval_sets(&d, &p).is_err());
    }
}
